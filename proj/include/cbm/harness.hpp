#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cbm/cbm.hpp"
#include "cbm/embedding_store.hpp"
#include "cbm/inductive.hpp"
#include "cbm/lle.hpp"

namespace cbm {

struct ProtocolConfig {
  int n_way = 5;
  int k_shot = 1;
  int n_query = 15;
  int n_tasks = 2000;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig / InsufficientSamples against the dataset.
  void validate(const EmbeddingDataset& novel) const;
};

struct InductiveMethod {};
struct CbmMethod {
  CbmConfig cbm;
};
struct CbmLleMethod {
  LleConfig lle;
  CbmConfig cbm;
};
using Method = std::variant<InductiveMethod, CbmMethod, CbmLleMethod>;

/// "inductive", "cbm" or "cbm-lle".
std::string method_name(const Method& method);

struct Report {
  Method method = InductiveMethod{};
  ProtocolConfig protocol;
  double accuracy = 0.0;
  double ci95 = 0.0;
  std::vector<double> per_task;
  double elapsed_seconds = 0.0;
};

/// Mean and 1.96 * s / sqrt(T) over per-task accuracies (s with n - 1).
std::pair<double, double> accuracy_and_ci95(const std::vector<double>& per_task);

/// Deterministic function of (cfg.seed, task_index): N distinct classes, then
/// K + Q distinct vectors per class, the first K forming the support.
Episode sample_episode(const EmbeddingDataset& novel, const ProtocolConfig& cfg,
                       std::uint64_t task_index);

struct EvalOptions {
  /// Worker count for the parallel path; 0 uses the OpenMP default.
  int threads = 0;
};

/// Parallel over tasks. Produces the same Report as evaluate_serial for any
/// thread count.
Report evaluate(const EmbeddingDataset& novel, const BaseMatrix& base, const Method& method,
                const ProtocolConfig& cfg, const EvalOptions& options = {});

/// Single-threaded reference.
Report evaluate_serial(const EmbeddingDataset& novel, const BaseMatrix& base,
                       const Method& method, const ProtocolConfig& cfg);

enum class SweepMethod { Cbm, CbmLle };

struct SweepGrid {
  SweepMethod method = SweepMethod::Cbm;
  std::vector<double> alphas = default_alphas();
  /// sigma' / softmax / sigma combinations; their alpha is ignored.
  std::vector<CbmConfig> variants = {CbmConfig::defaults()};
  // LLE axes, ignored for SweepMethod::Cbm.
  std::vector<int> ks = {10};
  std::vector<int> c_primes = {63};
  std::vector<bool> l2_options = {false};
  double reg = 1e-3;

  /// 0.00, 0.05, ..., 1.00.
  static std::vector<double> default_alphas();

  /// Grid points in evaluation order: variant, l2, k, c', alpha (innermost).
  std::vector<Method> points() const;
};

/// Parses "lo:hi:step" into an inclusive grid. Values are lo + i * step,
/// rounded to 1e-12 to keep 0.05 steps exact in printing.
std::vector<double> parse_range(const std::string& spec);

struct SweepEntry {
  std::size_t grid_index = 0;
  Report report;
};

struct SweepResult {
  /// Sorted by accuracy descending, ties by grid order.
  std::vector<SweepEntry> ranked;
  const SweepEntry& best() const { return ranked.front(); }
};

/// Every grid point sees the same episodes (same seed and task indices).
SweepResult sweep(const EmbeddingDataset& novel, const BaseMatrix& base, const SweepGrid& grid,
                  const ProtocolConfig& cfg, const EvalOptions& options = {});

}  // namespace cbm
