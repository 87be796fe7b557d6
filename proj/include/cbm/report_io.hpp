#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbm/harness.hpp"

namespace cbm {

std::string kind_name(SimilarityKind kind);  // "cos", "euclid", "kl"
SimilarityKind parse_kind(const std::string& name);

nlohmann::ordered_json method_config_json(const Method& method);

/// {method, config, n_way, k_shot, n_query, n_tasks, seed, accuracy, ci95,
///  per_task?, elapsed_seconds}
nlohmann::ordered_json report_json(const Report& report, bool include_per_task);

/// Single-row CSV with a header line.
/// Shortest round-trip decimal form.
std::string format_number(double value);

void write_report_csv(std::ostream& out, const Report& report);

/// One row per grid point, in ranked order.
void write_sweep_csv(std::ostream& out, const SweepResult& result);

/// A parsed sweep CSV row.
struct SweepRow {
  std::size_t rank = 0;
  std::size_t grid_index = 0;
  std::string method;
  std::string variant;
  bool l2 = false;
  int k = 0;
  int c_prime = 0;
  double alpha = 0.0;
  double accuracy = 0.0;
  double ci95 = 0.0;
};

std::vector<SweepRow> read_sweep_csv(std::istream& in);

/// Accuracy-vs-alpha series, one per (method, variant, l2, k, c') curve.
struct AlphaCurve {
  std::string label;
  std::vector<double> alphas;
  std::vector<double> accuracy;
  std::vector<double> ci95;
};

std::vector<AlphaCurve> alpha_curves(const std::vector<SweepRow>& rows);

/// Wide table: alpha column then one accuracy column per curve.
void write_alpha_table_csv(std::ostream& out, const std::vector<AlphaCurve>& curves);
nlohmann::ordered_json alpha_curves_json(const std::vector<AlphaCurve>& curves);

}  // namespace cbm
