#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbm/types.hpp"

namespace cbm {

/// A c x r grid of local feature vectors; column i is the vector at spatial
/// position i.
class FeatureMap {
 public:
  explicit FeatureMap(Matrix data);

  Eigen::Index channels() const noexcept { return data_.rows(); }
  Eigen::Index positions() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  auto local(Eigen::Index i) const { return data_.col(i); }

 private:
  Matrix data_;
};

/// Global average pooling: the mean of the r local vectors.
Vector gap(const FeatureMap& map);

enum class Role : std::uint8_t { Base = 0, Novel = 1 };

struct ClassSamples {
  std::uint32_t class_id = 0;
  std::optional<std::string> label;
  /// dim x n, one pooled vector per column.
  Matrix vectors;

  Eigen::Index count() const noexcept { return vectors.cols(); }
};

/// Labeled pooled vectors grouped by class.
class EmbeddingDataset {
 public:
  EmbeddingDataset(Eigen::Index dim, Role role, std::vector<ClassSamples> classes);

  Eigen::Index dim() const noexcept { return dim_; }
  Role role() const noexcept { return role_; }
  const std::vector<ClassSamples>& classes() const noexcept { return classes_; }
  std::size_t class_count() const noexcept { return classes_.size(); }
  Eigen::Index min_class_size() const noexcept;

  /// Splits off the first `n_first` classes (in stored order) into a new
  /// dataset; the remaining classes form the second. Roles are preserved.
  std::pair<EmbeddingDataset, EmbeddingDataset> split_classes(std::size_t n_first) const;

  friend bool operator==(const EmbeddingDataset& a, const EmbeddingDataset& b);

 private:
  Eigen::Index dim_;
  Role role_;
  std::vector<ClassSamples> classes_;
};

/// Per-class mean vectors of the base classes, one column per class.
class BaseMatrix {
 public:
  BaseMatrix(Matrix columns, std::vector<std::uint32_t> class_ids);

  const Matrix& matrix() const noexcept { return columns_; }
  const std::vector<std::uint32_t>& class_ids() const noexcept { return class_ids_; }
  Eigen::Index dim() const noexcept { return columns_.rows(); }
  Eigen::Index size() const noexcept { return columns_.cols(); }
  auto column(Eigen::Index i) const { return columns_.col(i); }

 private:
  Matrix columns_;
  std::vector<std::uint32_t> class_ids_;
};

BaseMatrix build_base_matrix(const EmbeddingDataset& dataset);

// ---------------------------------------------------------------------------
// CBME files
//
//   "CBME" | u32 version=1 | u32 dim | u8 role | u32 class count
//   per class: u32 class_id | u32 n | n*dim binary32, row-major (vector by vector)
//
// All integers and floats little-endian.

inline constexpr std::uint32_t kCbmeVersion = 1;

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path);
EmbeddingDataset load_dataset(const std::filesystem::path& path);

/// Writes `{"<class_id>": "<label>", ...}` for labelled classes.
void save_labels(const EmbeddingDataset& dataset, const std::filesystem::path& path);
/// Attaches labels from a sidecar manifest; unknown ids are ignored.
void load_labels(EmbeddingDataset& dataset, const std::filesystem::path& path);

/// Default sidecar location: `<path>.labels.json`.
std::filesystem::path labels_path_for(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  Eigen::Index dim = 64;
  std::size_t base_classes = 64;
  std::size_t novel_classes = 20;
  std::size_t base_samples = 100;
  std::size_t novel_samples = 40;
  double center_scale = 1.0;
  double base_noise = 0.1;
  double novel_noise = 0.1;
  /// 0 draws centers uniformly in [-s, s]^dim. A positive value draws them in
  /// [-s, s]^latent_dim and embeds them through a random orthonormal basis.
  Eigen::Index latent_dim = 0;
};

/// Base class ids are 0..base_classes-1, novel ids follow. Payloads are
/// rounded to binary32 so the result survives a file round-trip unchanged.
std::pair<EmbeddingDataset, EmbeddingDataset> generate_synthetic(const SyntheticSpec& spec,
                                                                 std::uint64_t seed);

}  // namespace cbm
