#include "cbm/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cbm/error.hpp"

namespace cbm {

std::string kind_name(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::Cosine: return "cos";
    case SimilarityKind::NegEuclidean: return "euclid";
    case SimilarityKind::NegKl: return "kl";
  }
  return "?";
}

SimilarityKind parse_kind(const std::string& name) {
  if (name == "cos" || name == "cosine") return SimilarityKind::Cosine;
  if (name == "euclid" || name == "euclidean") return SimilarityKind::NegEuclidean;
  if (name == "kl") return SimilarityKind::NegKl;
  throw Error(ErrorKind::InvalidConfig, "unknown similarity '" + name + "'");
}

std::string format_number(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

namespace {

nlohmann::ordered_json cbm_json(const CbmConfig& c) {
  nlohmann::ordered_json j;
  j["sigma_prime"] = kind_name(c.sigma_prime());
  j["softmax"] = c.apply_softmax();
  j["sigma"] = kind_name(c.sigma());
  j["alpha"] = c.alpha();
  return j;
}

struct PointFields {
  std::string variant;
  bool l2 = false;
  int k = 0;
  int c_prime = 0;
  double alpha = 1.0;
};

PointFields fields_of(const Method& method) {
  PointFields f;
  if (const auto* cbm = std::get_if<CbmMethod>(&method)) {
    f.variant = cbm->cbm.variant_name();
    f.alpha = cbm->cbm.alpha();
  } else if (const auto* lle = std::get_if<CbmLleMethod>(&method)) {
    f.variant = lle->cbm.variant_name();
    f.alpha = lle->cbm.alpha();
    f.l2 = lle->lle.l2_normalize;
    f.k = lle->lle.k;
    f.c_prime = lle->lle.c_prime;
  } else {
    f.variant = "-";
  }
  return f;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(line);
  for (std::string part; std::getline(stream, part, sep);) parts.push_back(part);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

nlohmann::ordered_json method_config_json(const Method& method) {
  if (const auto* cbm = std::get_if<CbmMethod>(&method)) return cbm_json(cbm->cbm);
  if (const auto* lle = std::get_if<CbmLleMethod>(&method)) {
    auto j = cbm_json(lle->cbm);
    j["lle_k"] = lle->lle.k;
    j["lle_dim"] = lle->lle.c_prime;
    j["l2_normalize"] = lle->lle.l2_normalize;
    j["lle_reg"] = lle->lle.reg;
    return j;
  }
  return nlohmann::ordered_json::object();
}

nlohmann::ordered_json report_json(const Report& report, bool include_per_task) {
  nlohmann::ordered_json j;
  j["method"] = method_name(report.method);
  j["config"] = method_config_json(report.method);
  j["n_way"] = report.protocol.n_way;
  j["k_shot"] = report.protocol.k_shot;
  j["n_query"] = report.protocol.n_query;
  j["n_tasks"] = report.protocol.n_tasks;
  j["seed"] = report.protocol.seed;
  j["accuracy"] = report.accuracy;
  j["ci95"] = report.ci95;
  if (include_per_task) j["per_task"] = report.per_task;
  j["elapsed_seconds"] = report.elapsed_seconds;
  return j;
}

void write_report_csv(std::ostream& out, const Report& report) {
  const auto f = fields_of(report.method);
  out << "method,variant,l2_normalize,lle_k,lle_dim,alpha,n_way,k_shot,n_query,n_tasks,seed,accuracy,ci95,"
         "elapsed_seconds\n";
  out << method_name(report.method) << ',' << f.variant << ',' << (f.l2 ? 1 : 0) << ',' << f.k << ','
      << f.c_prime << ',' << format_number(f.alpha) << ',' << report.protocol.n_way << ','
      << report.protocol.k_shot << ',' << report.protocol.n_query << ',' << report.protocol.n_tasks << ','
      << report.protocol.seed << ',' << format_number(report.accuracy) << ',' << format_number(report.ci95)
      << ',' << format_number(report.elapsed_seconds) << '\n';
}

static constexpr const char* kSweepHeader =
    "rank,grid_index,method,variant,l2_normalize,lle_k,lle_dim,alpha,accuracy,ci95";

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << kSweepHeader << '\n';
  for (std::size_t r = 0; r < result.ranked.size(); ++r) {
    const auto& entry = result.ranked[r];
    const auto f = fields_of(entry.report.method);
    out << r + 1 << ',' << entry.grid_index << ',' << method_name(entry.report.method) << ',' << f.variant
        << ',' << (f.l2 ? 1 : 0) << ',' << f.k << ',' << f.c_prime << ',' << format_number(f.alpha) << ','
        << format_number(entry.report.accuracy) << ',' << format_number(entry.report.ci95) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader)
    throw Error(ErrorKind::IoError, "not a sweep CSV (header mismatch)");
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 10) throw Error(ErrorKind::IoError, "sweep CSV line " + std::to_string(line_no) + " malformed");
    try {
      SweepRow row;
      row.rank = std::stoul(cells[0]);
      row.grid_index = std::stoul(cells[1]);
      row.method = cells[2];
      row.variant = cells[3];
      row.l2 = cells[4] == "1";
      row.k = std::stoi(cells[5]);
      row.c_prime = std::stoi(cells[6]);
      row.alpha = std::stod(cells[7]);
      row.accuracy = std::stod(cells[8]);
      row.ci95 = std::stod(cells[9]);
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::IoError, "sweep CSV line " + std::to_string(line_no) + " has a bad number");
    }
  }
  return rows;
}

std::vector<AlphaCurve> alpha_curves(const std::vector<SweepRow>& rows) {
  std::vector<SweepRow> ordered = rows;
  std::sort(ordered.begin(), ordered.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.grid_index < b.grid_index; });
  std::vector<AlphaCurve> curves;
  std::map<std::string, std::size_t> index;
  for (const auto& row : ordered) {
    std::string label = row.method + " " + row.variant;
    if (row.method == "cbm-lle")
      label += " l2=" + std::to_string(row.l2 ? 1 : 0) + " k=" + std::to_string(row.k) +
               " c'=" + std::to_string(row.c_prime);
    auto [it, inserted] = index.try_emplace(label, curves.size());
    if (inserted) curves.push_back(AlphaCurve{label, {}, {}, {}});
    auto& curve = curves[it->second];
    curve.alphas.push_back(row.alpha);
    curve.accuracy.push_back(row.accuracy);
    curve.ci95.push_back(row.ci95);
  }
  return curves;
}

void write_alpha_table_csv(std::ostream& out, const std::vector<AlphaCurve>& curves) {
  std::set<double> alphas;
  for (const auto& c : curves) alphas.insert(c.alphas.begin(), c.alphas.end());
  out << "alpha";
  for (const auto& c : curves) out << ',' << c.label;
  out << '\n';
  for (const double a : alphas) {
    out << format_number(a);
    for (const auto& c : curves) {
      out << ',';
      const auto it = std::find(c.alphas.begin(), c.alphas.end(), a);
      if (it != c.alphas.end()) out << format_number(c.accuracy[static_cast<std::size_t>(it - c.alphas.begin())]);
    }
    out << '\n';
  }
}

nlohmann::ordered_json alpha_curves_json(const std::vector<AlphaCurve>& curves) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& c : curves) {
    nlohmann::ordered_json curve;
    curve["label"] = c.label;
    curve["alpha"] = c.alphas;
    curve["accuracy"] = c.accuracy;
    curve["ci95"] = c.ci95;
    j.push_back(std::move(curve));
  }
  return j;
}

}  // namespace cbm
