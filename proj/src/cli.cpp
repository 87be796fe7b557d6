#include "cbm/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbm/embedding_store.hpp"
#include "cbm/error.hpp"
#include "cbm/harness.hpp"
#include "cbm/report_io.hpp"

namespace cbm {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::IoError, "SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

struct ProtocolFlags {
  int n_way = 5;
  int k_shot = 1;
  int n_query = 15;
  int n_tasks = 2000;
  std::uint64_t seed = 0;

  ProtocolConfig config() const { return {n_way, k_shot, n_query, n_tasks, seed}; }
};

struct MethodFlags {
  std::string method = "cbm";
  std::string sigma_prime = "cos";
  bool softmax = true;
  std::string sigma = "cos";
  double alpha = 0.05;
  int lle_k = 10;
  int lle_dim = 63;
  bool l2_normalize = false;
  double lle_reg = 1e-3;

  CbmConfig cbm(double a) const {
    return CbmConfig(parse_kind(sigma_prime), softmax, parse_kind(sigma), a);
  }
  LleConfig lle() const {
    if (lle_k < 1 || lle_dim < 1 || !(lle_reg >= 0.0))
      throw Error(ErrorKind::InvalidConfig, "--lle-k and --lle-dim must be positive, --lle-reg nonnegative");
    return {lle_k, lle_dim, l2_normalize, lle_reg};
  }
  Method resolve() const {
    if (method == "inductive") return InductiveMethod{};
    if (method == "cbm") return CbmMethod{cbm(alpha)};
    if (method == "cbm-lle") return CbmLleMethod{lle(), cbm(alpha)};
    throw Error(ErrorKind::InvalidConfig, "unknown method '" + method + "'");
  }
};

struct OutputFlags {
  std::string out;
  std::string format = "json";
  bool fixed_timing = false;
};

void add_protocol(CLI::App* app, ProtocolFlags& p) {
  app->add_option("--n-way", p.n_way, "Classes per task")->capture_default_str();
  app->add_option("--k-shot", p.k_shot, "Support samples per class")->capture_default_str();
  app->add_option("--n-query", p.n_query, "Query samples per class")->capture_default_str();
  app->add_option("--n-tasks", p.n_tasks, "Number of tasks")->capture_default_str();
  app->add_option("--seed", p.seed, "Sampling seed")->capture_default_str();
}

void add_method(CLI::App* app, MethodFlags& m, bool with_alpha) {
  app->add_option("--method", m.method, "inductive | cbm | cbm-lle")
      ->check(CLI::IsMember({"inductive", "cbm", "cbm-lle"}))
      ->capture_default_str();
  app->add_option("--sigma-prime", m.sigma_prime, "Vector-vs-base similarity: cos | euclid")
      ->check(CLI::IsMember({"cos", "euclid"}))
      ->capture_default_str();
  app->add_flag("--softmax,!--no-softmax", m.softmax, "Softmax-normalize similarity distributions (default on)");
  app->add_option("--sigma", m.sigma, "Distribution similarity: cos | euclid | kl")
      ->check(CLI::IsMember({"cos", "euclid", "kl"}))
      ->capture_default_str();
  if (with_alpha) app->add_option("--alpha", m.alpha, "Inductive weight in [0, 1]")->capture_default_str();
  app->add_option("--lle-k", m.lle_k, "LLE neighbour count")->capture_default_str();
  app->add_option("--lle-dim", m.lle_dim, "LLE reduced dimension")->capture_default_str();
  app->add_flag("--l2-normalize", m.l2_normalize, "L2-normalize vectors before LLE");
  app->add_option("--lle-reg", m.lle_reg, "LLE covariance regularization")->capture_default_str();
}

void add_output(CLI::App* app, OutputFlags& o, bool with_format) {
  app->add_option("--out", o.out, "Output path (stdout when omitted)");
  if (with_format)
    app->add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app->add_flag("--fixed-timing", o.fixed_timing, "Write elapsed_seconds = 0 for byte-reproducible output");
}

int default_threads() {
  if (const char* env = std::getenv("CBM_DEFAULT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 0;
}

EmbeddingDataset load_with_labels(const std::string& path) {
  EmbeddingDataset ds = load_dataset(path);
  const auto labels = labels_path_for(path);
  if (std::filesystem::exists(labels)) load_labels(ds, labels);
  return ds;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::IoError, "cannot write " + path);
  file << text;
}

/// Records how a run was invoked, next to its primary output.
class Manifest {
 public:
  Manifest(const std::vector<std::string>& args, const CLI::App& sub) {
    json_["tool"] = "cbm";
    json_["version"] = kToolVersion;
    json_["subcommand"] = sub.get_name();
    json_["argv"] = args;
    nlohmann::ordered_json flags = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_name();
      if (name.empty() || name == "--help") continue;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        flags[name] = results.size() == 1 ? nlohmann::ordered_json(results.front()) : nlohmann::ordered_json(results);
      } else if (!opt->get_default_str().empty()) {
        flags[name] = opt->get_default_str();
      }
    }
    json_["flags"] = std::move(flags);
    json_["inputs"] = nlohmann::ordered_json::array();
    json_["outputs"] = nlohmann::ordered_json::array();
  }

  void seed(std::uint64_t s) { json_["seed"] = s; }
  void input(const std::string& path) { json_["inputs"].push_back({{"path", path}, {"sha256", sha256_file(path)}}); }
  void output(const std::string& path) { json_["outputs"].push_back(path); }

  /// Writes `<primary>.manifest.json`, or prints one line to `err` when the
  /// primary output went to stdout.
  void emit(const std::string& primary, std::ostream& err) const {
    if (primary.empty())
      err << "manifest: " << json_.dump() << '\n';
    else
      write_text(primary + ".manifest.json", json_.dump(2) + "\n");
  }

 private:
  nlohmann::ordered_json json_;
};

void emit_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_text(path, text);
}

// ---------------------------------------------------------------------------

struct GenFlags {
  SyntheticSpec spec;
  std::optional<double> noise;
  std::uint64_t seed = 0;
  std::string base_out;
  std::string novel_out;
};

int run_gen(const std::vector<std::string>& args, const CLI::App& sub, GenFlags& g, std::ostream& err) {
  if (g.noise) g.spec.base_noise = g.spec.novel_noise = *g.noise;
  auto [base, novel] = generate_synthetic(g.spec, g.seed);
  save_dataset(base, g.base_out);
  save_dataset(novel, g.novel_out);
  Manifest manifest(args, sub);
  manifest.seed(g.seed);
  manifest.output(g.base_out);
  manifest.output(g.novel_out);
  manifest.emit(g.base_out, err);
  return kExitOk;
}

int run_base_matrix(const std::vector<std::string>& args, const CLI::App& sub, const std::string& base_path,
                    const OutputFlags& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty() && o.format != "csv")
    throw Error(ErrorKind::InvalidConfig, "base-matrix writes a CBME file; pass --out or use --format csv");
  const EmbeddingDataset ds = load_with_labels(base_path);
  const BaseMatrix matrix = build_base_matrix(ds);
  if (o.format == "csv") {
    std::ostringstream text;
    text << "class_id";
    for (Eigen::Index i = 0; i < matrix.dim(); ++i) text << ",v" << i;
    text << '\n';
    for (Eigen::Index c = 0; c < matrix.size(); ++c) {
      text << matrix.class_ids()[static_cast<std::size_t>(c)];
      for (Eigen::Index i = 0; i < matrix.dim(); ++i) text << ',' << format_number(matrix.matrix()(i, c));
      text << '\n';
    }
    emit_text(o.out, text.str(), out);
  } else {
    std::vector<ClassSamples> columns;
    for (Eigen::Index c = 0; c < matrix.size(); ++c) {
      const auto& src = ds.classes()[static_cast<std::size_t>(c)];
      columns.push_back(ClassSamples{src.class_id, src.label, matrix.column(c)});
    }
    const EmbeddingDataset cached(ds.dim(), Role::Base, std::move(columns));
    save_dataset(cached, o.out);
    if (std::any_of(cached.classes().begin(), cached.classes().end(), [](const auto& c) { return c.label; }))
      save_labels(cached, labels_path_for(o.out));
  }
  Manifest manifest(args, sub);
  manifest.input(base_path);
  if (!o.out.empty()) manifest.output(o.out);
  manifest.emit(o.out, err);
  return kExitOk;
}

int run_eval(const std::vector<std::string>& args, const CLI::App& sub, const std::string& base_path,
             const std::string& novel_path, const Method& method, const ProtocolConfig& protocol, int threads,
             bool per_task, const OutputFlags& o, std::ostream& out, std::ostream& err) {
  const EmbeddingDataset base_ds = load_with_labels(base_path);
  const EmbeddingDataset novel = load_with_labels(novel_path);
  const BaseMatrix base = build_base_matrix(base_ds);
  Report report = evaluate(novel, base, method, protocol, EvalOptions{threads});
  if (o.fixed_timing) report.elapsed_seconds = 0.0;

  std::ostringstream text;
  if (o.format == "csv")
    write_report_csv(text, report);
  else
    text << report_json(report, per_task).dump(2) << '\n';
  emit_text(o.out, text.str(), out);

  Manifest manifest(args, sub);
  manifest.seed(protocol.seed);
  manifest.input(base_path);
  manifest.input(novel_path);
  if (!o.out.empty()) manifest.output(o.out);
  manifest.emit(o.out, err);
  return kExitOk;
}

struct SweepFlags {
  std::string alpha_grid = "0:1:0.05";
  bool all_variants = false;
  std::string k_grid;
  std::string dim_grid;
  std::string l2_grid;
};

std::vector<int> parse_int_grid(const std::string& spec) {
  std::vector<int> values;
  for (const double v : parse_range(spec)) {
    if (v != std::floor(v) || v < 1) throw Error(ErrorKind::InvalidConfig, "grid '" + spec + "' must hold positive integers");
    values.push_back(static_cast<int>(v));
  }
  return values;
}

SweepGrid make_grid(const MethodFlags& m, const SweepFlags& s) {
  SweepGrid grid;
  if (m.method == "inductive") throw Error(ErrorKind::InvalidConfig, "sweep needs --method cbm or cbm-lle");
  grid.method = m.method == "cbm-lle" ? SweepMethod::CbmLle : SweepMethod::Cbm;
  grid.alphas = parse_range(s.alpha_grid);
  for (const double a : grid.alphas) (void)combined_score(0.0, 0.0, a);
  grid.variants = s.all_variants ? all_variants(0.0) : std::vector<CbmConfig>{m.cbm(0.0)};
  const LleConfig lle = m.lle();
  grid.ks = s.k_grid.empty() ? std::vector<int>{lle.k} : parse_int_grid(s.k_grid);
  grid.c_primes = s.dim_grid.empty() ? std::vector<int>{lle.c_prime} : parse_int_grid(s.dim_grid);
  if (s.l2_grid.empty()) {
    grid.l2_options = {lle.l2_normalize};
  } else {
    grid.l2_options.clear();
    for (const double v : parse_range(s.l2_grid)) {
      if (v != 0.0 && v != 1.0) throw Error(ErrorKind::InvalidConfig, "--l2-grid takes 0/1 values");
      grid.l2_options.push_back(v == 1.0);
    }
  }
  grid.reg = lle.reg;
  return grid;
}

int run_sweep(const std::vector<std::string>& args, const CLI::App& sub, const std::string& base_path,
              const std::string& novel_path, const SweepGrid& grid, const ProtocolConfig& protocol, int threads,
              const OutputFlags& o, std::ostream& out, std::ostream& err) {
  const EmbeddingDataset base_ds = load_with_labels(base_path);
  const EmbeddingDataset novel = load_with_labels(novel_path);
  const BaseMatrix base = build_base_matrix(base_ds);
  SweepResult result = sweep(novel, base, grid, protocol, EvalOptions{threads});
  if (o.fixed_timing)
    for (auto& entry : result.ranked) entry.report.elapsed_seconds = 0.0;

  std::ostringstream csv;
  write_sweep_csv(csv, result);
  emit_text(o.out, csv.str(), out);
  Manifest manifest(args, sub);
  manifest.seed(protocol.seed);
  manifest.input(base_path);
  manifest.input(novel_path);
  if (!o.out.empty()) {
    const std::string best_path = o.out + ".best.json";
    write_text(best_path, report_json(result.best().report, false).dump(2) + "\n");
    manifest.output(o.out);
    manifest.output(best_path);
  } else {
    err << "best: " << report_json(result.best().report, false).dump() << '\n';
  }
  manifest.emit(o.out, err);
  return kExitOk;
}

int run_report(const std::vector<std::string>& args, const CLI::App& sub, const std::string& in_path,
               const OutputFlags& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(in_path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + in_path);
  const auto curves = alpha_curves(read_sweep_csv(in));
  std::ostringstream text;
  if (o.format == "csv")
    write_alpha_table_csv(text, curves);
  else
    text << alpha_curves_json(curves).dump(2) << '\n';
  emit_text(o.out, text.str(), out);
  Manifest manifest(args, sub);
  manifest.input(in_path);
  if (!o.out.empty()) manifest.output(o.out);
  manifest.emit(o.out, err);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot evaluation with the cooperative bi-path metric", "cbm"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // gen-synthetic
  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write synthetic base/novel CBME files");
  gen_cmd->add_option("--dim", gen.spec.dim, "Vector dimension")->capture_default_str();
  gen_cmd->add_option("--base-classes", gen.spec.base_classes)->capture_default_str();
  gen_cmd->add_option("--novel-classes", gen.spec.novel_classes)->capture_default_str();
  gen_cmd->add_option("--base-samples", gen.spec.base_samples, "Vectors per base class")->capture_default_str();
  gen_cmd->add_option("--novel-samples", gen.spec.novel_samples, "Vectors per novel class")->capture_default_str();
  gen_cmd->add_option("--center-scale", gen.spec.center_scale)->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Sets both noise scales");
  gen_cmd->add_option("--base-noise", gen.spec.base_noise)->capture_default_str();
  gen_cmd->add_option("--novel-noise", gen.spec.novel_noise)->capture_default_str();
  gen_cmd->add_option("--latent-dim", gen.spec.latent_dim, "0 = centers span the full space")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--base", gen.base_out, "Output path for the base dataset")->required();
  gen_cmd->add_option("--novel", gen.novel_out, "Output path for the novel dataset")->required();

  // base-matrix
  std::string bm_base;
  OutputFlags bm_out;
  bm_out.format = "cbme";
  auto* bm_cmd = app.add_subcommand("base-matrix", "Compute per-class base means");
  bm_cmd->add_option("--base", bm_base, "Base dataset")->required()->check(CLI::ExistingFile);
  bm_cmd->add_option("--out", bm_out.out, "Output path");
  bm_cmd->add_option("--format", bm_out.format, "cbme | csv")->check(CLI::IsMember({"cbme", "csv"}))->capture_default_str();

  // eval
  std::string ev_base, ev_novel;
  ProtocolFlags ev_protocol;
  MethodFlags ev_method;
  OutputFlags ev_out;
  bool ev_per_task = false;
  int threads = default_threads();
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate one method over sampled tasks");
  ev_cmd->add_option("--base", ev_base, "Base dataset or cached base matrix")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--novel", ev_novel, "Novel dataset")->required()->check(CLI::ExistingFile);
  add_method(ev_cmd, ev_method, true);
  add_protocol(ev_cmd, ev_protocol);
  add_output(ev_cmd, ev_out, true);
  ev_cmd->add_flag("--per-task", ev_per_task, "Include per-task accuracies in JSON output");
  ev_cmd->add_option("--threads", threads, "Worker threads (0 = OpenMP default)");

  // sweep
  std::string sw_base, sw_novel;
  ProtocolFlags sw_protocol;
  MethodFlags sw_method;
  OutputFlags sw_out;
  SweepFlags sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Evaluate a hyperparameter grid on shared tasks");
  sw_cmd->add_option("--base", sw_base, "Base dataset or cached base matrix")->required()->check(CLI::ExistingFile);
  sw_cmd->add_option("--novel", sw_novel, "Validation novel dataset")->required()->check(CLI::ExistingFile);
  add_method(sw_cmd, sw_method, false);
  add_protocol(sw_cmd, sw_protocol);
  add_output(sw_cmd, sw_out, false);
  sw_cmd->add_option("--alpha-grid", sw.alpha_grid, "lo:hi:step or a comma list")->capture_default_str();
  sw_cmd->add_flag("--all-variants", sw.all_variants, "Sweep all ten sigma'/softmax/sigma variants");
  sw_cmd->add_option("--lle-k-grid", sw.k_grid, "LLE k values (lo:hi:step or list)");
  sw_cmd->add_option("--lle-dim-grid", sw.dim_grid, "LLE c' values (lo:hi:step or list)");
  sw_cmd->add_option("--l2-grid", sw.l2_grid, "L2 options, e.g. 0,1");
  sw_cmd->add_option("--threads", threads, "Worker threads (0 = OpenMP default)");

  // report
  std::string rp_in;
  OutputFlags rp_out;
  rp_out.format = "csv";
  auto* rp_cmd = app.add_subcommand("report", "Render a sweep CSV as accuracy-vs-alpha data");
  rp_cmd->add_option("--in,input", rp_in, "Sweep CSV")->required()->check(CLI::ExistingFile);
  rp_cmd->add_option("--out", rp_out.out, "Output path (stdout when omitted)");
  rp_cmd->add_option("--format", rp_out.format, "csv | json")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(kToolVersion) + "\n" : app.help());
      return kExitOk;
    }
    err << "cbm: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (threads < 0) throw Error(ErrorKind::InvalidConfig, "--threads must be nonnegative");
    if (gen_cmd->parsed()) return run_gen(args, *gen_cmd, gen, err);
    if (bm_cmd->parsed()) return run_base_matrix(args, *bm_cmd, bm_base, bm_out, out, err);
    if (ev_cmd->parsed()) {
      // Flag combinations are validated before any file is read.
      const Method method = ev_method.resolve();
      return run_eval(args, *ev_cmd, ev_base, ev_novel, method, ev_protocol.config(), threads, ev_per_task,
                      ev_out, out, err);
    }
    if (sw_cmd->parsed()) {
      const SweepGrid grid = make_grid(sw_method, sw);
      (void)grid.points();
      return run_sweep(args, *sw_cmd, sw_base, sw_novel, grid, sw_protocol.config(), threads, sw_out, out, err);
    }
    if (rp_cmd->parsed()) return run_report(args, *rp_cmd, rp_in, rp_out, out, err);
  } catch (const Error& e) {
    err << "cbm: " << e.what() << '\n';
    switch (e.category()) {
      case ErrorCategory::Usage: return kExitUsage;
      case ErrorCategory::Data: return kExitData;
      case ErrorCategory::Numerical: return kExitNumerical;
    }
  } catch (const std::exception& e) {
    err << "cbm: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace cbm
