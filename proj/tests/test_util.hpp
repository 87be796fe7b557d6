#pragma once

#include <filesystem>
#include <string>

#include "doctest.h"

#include "cbm/error.hpp"

namespace testing {

/// Kind of the cbm::Error thrown by fn; fails the test if nothing is thrown.
template <class Fn>
cbm::ErrorKind error_of(Fn&& fn) {
  try {
    fn();
  } catch (const cbm::Error& e) {
    return e.kind();
  }
  FAIL("expected cbm::Error");
  return cbm::ErrorKind::IoError;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cbm_tests_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
