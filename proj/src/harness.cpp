#include "cbm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#include <omp.h>

#include "cbm/error.hpp"
#include "cbm/rng.hpp"

namespace cbm {

void ProtocolConfig::validate(const EmbeddingDataset& novel) const {
  if (n_way < 2) throw Error(ErrorKind::InvalidConfig, "n_way must be at least 2");
  if (k_shot < 1) throw Error(ErrorKind::InvalidConfig, "k_shot must be at least 1");
  if (n_query < 1) throw Error(ErrorKind::InvalidConfig, "n_query must be at least 1");
  if (n_tasks < 1) throw Error(ErrorKind::InvalidConfig, "n_tasks must be at least 1");
  if (static_cast<std::size_t>(n_way) > novel.class_count())
    throw Error(ErrorKind::InsufficientSamples, std::to_string(n_way) + "-way episodes need that many classes, dataset has " +
                                                    std::to_string(novel.class_count()));
  if (k_shot + n_query > novel.min_class_size())
    throw Error(ErrorKind::InsufficientSamples,
                "K + Q = " + std::to_string(k_shot + n_query) + " exceeds the smallest class (" +
                    std::to_string(novel.min_class_size()) + " vectors)");
}

std::string method_name(const Method& method) {
  struct {
    std::string operator()(const InductiveMethod&) const { return "inductive"; }
    std::string operator()(const CbmMethod&) const { return "cbm"; }
    std::string operator()(const CbmLleMethod&) const { return "cbm-lle"; }
  } visitor;
  return std::visit(visitor, method);
}

std::pair<double, double> accuracy_and_ci95(const std::vector<double>& per_task) {
  if (per_task.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(per_task.size());
  double sum = 0.0;
  for (const double a : per_task) sum += a;
  const double mean = sum / n;
  if (per_task.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double a : per_task) ss += (a - mean) * (a - mean);
  const double stddev = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * stddev / std::sqrt(n)};
}

Episode sample_episode(const EmbeddingDataset& novel, const ProtocolConfig& cfg, std::uint64_t task_index) {
  Rng rng = Rng::stream(cfg.seed, task_index);

  std::vector<std::size_t> class_order(novel.class_count());
  std::iota(class_order.begin(), class_order.end(), std::size_t{0});
  rng.partial_shuffle(std::span(class_order), static_cast<std::size_t>(cfg.n_way));

  Episode ep;
  ep.n_way = cfg.n_way;
  ep.k_shot = cfg.k_shot;
  ep.n_query = cfg.n_query;
  ep.queries.resize(novel.dim(), static_cast<Eigen::Index>(cfg.n_way) * cfg.n_query);
  ep.query_slots.reserve(static_cast<std::size_t>(cfg.n_way * cfg.n_query));

  const auto draw = static_cast<std::size_t>(cfg.k_shot + cfg.n_query);
  std::vector<Eigen::Index> sample_order;
  for (int slot = 0; slot < cfg.n_way; ++slot) {
    const auto& cls = novel.classes()[class_order[static_cast<std::size_t>(slot)]];
    if (static_cast<std::size_t>(cls.count()) < draw)
      throw Error(ErrorKind::InsufficientSamples, "class " + std::to_string(cls.class_id) + " is too small");
    sample_order.resize(static_cast<std::size_t>(cls.count()));
    std::iota(sample_order.begin(), sample_order.end(), Eigen::Index{0});
    rng.partial_shuffle(std::span(sample_order), draw);

    ep.class_ids.push_back(cls.class_id);
    Matrix support(novel.dim(), cfg.k_shot);
    for (int s = 0; s < cfg.k_shot; ++s) support.col(s) = cls.vectors.col(sample_order[static_cast<std::size_t>(s)]);
    ep.support.push_back(std::move(support));
    for (int q = 0; q < cfg.n_query; ++q) {
      const Eigen::Index column = static_cast<Eigen::Index>(slot) * cfg.n_query + q;
      ep.queries.col(column) = cls.vectors.col(sample_order[static_cast<std::size_t>(cfg.k_shot + q)]);
      ep.query_slots.push_back(slot);
    }
  }
  return ep;
}

namespace {

using Clock = std::chrono::steady_clock;

double fraction_correct(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::size_t correct = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) correct += predicted[j] == truth[j] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

/// Method state shared read-only by all tasks.
class PreparedMethod {
 public:
  PreparedMethod(const Method& method, const BaseMatrix& base) : method_(method) {
    if (const auto* lle = std::get_if<CbmLleMethod>(&method_)) {
      model_ = fit_lle(base, lle->lle);
      space_ = lle_space(*model_);
    } else if (std::holds_alternative<CbmMethod>(method_)) {
      space_ = identity_space(base);
    }
  }

  PreparedMethod(const PreparedMethod&) = delete;
  PreparedMethod& operator=(const PreparedMethod&) = delete;

  std::vector<int> predict(const Episode& episode) const {
    if (std::holds_alternative<InductiveMethod>(method_)) return inductive_predictions(episode);
    const CbmConfig& config = std::holds_alternative<CbmMethod>(method_)
                                  ? std::get<CbmMethod>(method_).cbm
                                  : std::get<CbmLleMethod>(method_).cbm;
    return predictions(combine(path_scores(episode, space_, config), config.alpha()));
  }

 private:
  const Method& method_;
  std::optional<LleModel> model_;
  TransductiveSpace space_;
};

void check_inputs(const EmbeddingDataset& novel, const BaseMatrix& base, const ProtocolConfig& cfg) {
  cfg.validate(novel);
  if (novel.dim() != base.dim())
    throw Error(ErrorKind::DimensionMismatch, "novel dimension " + std::to_string(novel.dim()) +
                                                  " vs base dimension " + std::to_string(base.dim()));
}

Report make_report(const Method& method, const ProtocolConfig& cfg, std::vector<double> per_task,
                   double elapsed) {
  Report report;
  report.method = method;
  report.protocol = cfg;
  std::tie(report.accuracy, report.ci95) = accuracy_and_ci95(per_task);
  report.per_task = std::move(per_task);
  report.elapsed_seconds = elapsed;
  return report;
}

/// Runs body(t) for t in [0, n) over an OpenMP team. An exception is carried
/// out of the team; when several tasks fail, the lowest index wins so the
/// reported error does not depend on scheduling.
template <class Body>
void parallel_tasks(int n, int threads, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(team)
  for (int t = 0; t < n; ++t) {
    try {
      body(t);
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Report evaluate(const EmbeddingDataset& novel, const BaseMatrix& base, const Method& method,
                const ProtocolConfig& cfg, const EvalOptions& options) {
  check_inputs(novel, base, cfg);
  const auto start = Clock::now();
  const PreparedMethod prepared(method, base);
  std::vector<double> per_task(static_cast<std::size_t>(cfg.n_tasks));
  parallel_tasks(cfg.n_tasks, options.threads, [&](int t) {
    const Episode ep = sample_episode(novel, cfg, static_cast<std::uint64_t>(t));
    per_task[static_cast<std::size_t>(t)] = fraction_correct(prepared.predict(ep), ep.query_slots);
  });
  const std::chrono::duration<double> elapsed = Clock::now() - start;
  return make_report(method, cfg, std::move(per_task), elapsed.count());
}

Report evaluate_serial(const EmbeddingDataset& novel, const BaseMatrix& base, const Method& method,
                       const ProtocolConfig& cfg) {
  check_inputs(novel, base, cfg);
  const auto start = Clock::now();
  const PreparedMethod prepared(method, base);
  std::vector<double> per_task;
  per_task.reserve(static_cast<std::size_t>(cfg.n_tasks));
  for (int t = 0; t < cfg.n_tasks; ++t) {
    const Episode ep = sample_episode(novel, cfg, static_cast<std::uint64_t>(t));
    per_task.push_back(fraction_correct(prepared.predict(ep), ep.query_slots));
  }
  const std::chrono::duration<double> elapsed = Clock::now() - start;
  return make_report(method, cfg, std::move(per_task), elapsed.count());
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<double> SweepGrid::default_alphas() { return parse_range("0:1:0.05"); }

std::vector<Method> SweepGrid::points() const {
  if (alphas.empty() || variants.empty())
    throw Error(ErrorKind::InvalidConfig, "sweep grid needs at least one alpha and one variant");
  std::vector<Method> out;
  for (const auto& variant : variants) {
    if (method == SweepMethod::Cbm) {
      for (const double a : alphas) out.push_back(CbmMethod{variant.with_alpha(a)});
      continue;
    }
    if (ks.empty() || c_primes.empty() || l2_options.empty())
      throw Error(ErrorKind::InvalidConfig, "LLE sweep needs k, c' and L2 values");
    for (const bool l2 : l2_options)
      for (const int k : ks)
        for (const int c_prime : c_primes)
          for (const double a : alphas)
            out.push_back(CbmLleMethod{LleConfig{k, c_prime, l2, reg}, variant.with_alpha(a)});
  }
  return out;
}

std::vector<double> parse_range(const std::string& spec) {
  auto parse_number = [&](const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || text.empty() || !std::isfinite(v))
      throw Error(ErrorKind::InvalidConfig, "bad number '" + text + "' in grid '" + spec + "'");
    return v;
  };
  auto snap = [](double v) { return std::round(v * 1e12) / 1e12; };

  std::vector<std::string> parts;
  const char separator = spec.find(':') != std::string::npos ? ':' : ',';
  std::stringstream stream(spec);
  for (std::string part; std::getline(stream, part, separator);) parts.push_back(part);

  std::vector<double> values;
  if (separator == ':') {
    if (parts.size() != 3) throw Error(ErrorKind::InvalidConfig, "range must be lo:hi:step, got '" + spec + "'");
    const double lo = parse_number(parts[0]);
    const double hi = parse_number(parts[1]);
    const double step = parse_number(parts[2]);
    if (!(step > 0.0) || hi < lo)
      throw Error(ErrorKind::InvalidConfig, "range '" + spec + "' needs lo <= hi and step > 0");
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) values.push_back(snap(lo + static_cast<double>(i) * step));
  } else {
    for (const auto& part : parts) values.push_back(parse_number(part));
  }
  if (values.empty()) throw Error(ErrorKind::InvalidConfig, "empty grid '" + spec + "'");
  return values;
}

SweepResult sweep(const EmbeddingDataset& novel, const BaseMatrix& base, const SweepGrid& grid,
                  const ProtocolConfig& cfg, const EvalOptions& options) {
  check_inputs(novel, base, cfg);
  const std::vector<Method> points = grid.points();
  const std::size_t n_alpha = grid.alphas.size();
  for (const double a : grid.alphas) (void)combined_score(0.0, 0.0, a);

  // Points come in runs of n_alpha sharing everything but alpha. Each run
  // scores every task once and re-weights the two paths per alpha.
  SweepResult result;
  result.ranked.reserve(points.size());
  for (std::size_t first = 0; first < points.size(); first += n_alpha) {
    const auto start = Clock::now();
    std::optional<LleModel> model;
    CbmConfig variant = CbmConfig::defaults();
    if (const auto* lle = std::get_if<CbmLleMethod>(&points[first])) {
      model = fit_lle(base, lle->lle);
      variant = lle->cbm;
    } else {
      variant = std::get<CbmMethod>(points[first]).cbm;
    }
    const TransductiveSpace space = model ? lle_space(*model) : identity_space(base);

    std::vector<std::vector<double>> per_task(n_alpha, std::vector<double>(static_cast<std::size_t>(cfg.n_tasks)));
    parallel_tasks(cfg.n_tasks, options.threads, [&](int t) {
      const Episode ep = sample_episode(novel, cfg, static_cast<std::uint64_t>(t));
      const PathScores scores = path_scores(ep, space, variant);
      for (std::size_t a = 0; a < n_alpha; ++a)
        per_task[a][static_cast<std::size_t>(t)] =
            fraction_correct(predictions(combine(scores, grid.alphas[a])), ep.query_slots);
    });

    const std::chrono::duration<double> elapsed = Clock::now() - start;
    for (std::size_t a = 0; a < n_alpha; ++a)
      result.ranked.push_back({first + a, make_report(points[first + a], cfg, std::move(per_task[a]),
                                                      elapsed.count() / static_cast<double>(n_alpha))});
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const SweepEntry& a, const SweepEntry& b) { return a.report.accuracy > b.report.accuracy; });
  return result;
}

}  // namespace cbm
