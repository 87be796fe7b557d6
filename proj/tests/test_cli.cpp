#include "doctest.h"

#include <fstream>
#include <sstream>

#include "cbm/cli.hpp"
#include "cbm/harness.hpp"
#include "cbm/report_io.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace cbm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Files {
  fs::path dir, base, novel;
};

Files make_files(const std::string& name) {
  const auto dir = testing::temp_dir(name);
  Files f{dir, dir / "base.cbme", dir / "novel.cbme"};
  const auto r = run({"gen-synthetic", "--dim", "16", "--base-classes", "10", "--novel-classes", "8",
                      "--base-samples", "6", "--novel-samples", "20", "--noise", "0.8", "--seed", "3", "--base",
                      f.base.string(), "--novel", f.novel.string()});
  REQUIRE(r.code == kExitOk);
  return f;
}

}  // namespace

TEST_CASE("cli usage errors") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  const auto v = run({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out == std::string(kToolVersion) + "\n");
  const auto f = make_files("cli_usage");
  const std::vector<std::string> common{"eval", "--base", f.base.string(), "--novel", f.novel.string()};
  auto with = [&](std::vector<std::string> extra) {
    auto a = common;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a).code;
  };
  CHECK(with({"--method", "cbm", "--sigma", "kl", "--no-softmax"}) == kExitUsage);
  CHECK(with({"--method", "cbm", "--sigma-prime", "kl"}) == kExitUsage);
  CHECK(with({"--method", "cbm", "--alpha", "1.5"}) == kExitUsage);
  CHECK(with({"--method", "nope"}) == kExitUsage);
  CHECK(with({"--n-tasks", "0"}) == kExitUsage);
  CHECK(with({"--method", "cbm-lle", "--lle-k", "10"}) == kExitUsage);
  CHECK(with({"--threads", "-1"}) == kExitUsage);
}

TEST_CASE("cli data errors") {
  const auto dir = testing::temp_dir("cli_data");
  const auto junk = dir / "junk.cbme";
  std::ofstream(junk, std::ios::binary) << "not an embedding file";
  const auto r = run({"eval", "--base", junk.string(), "--novel", junk.string()});
  CHECK(r.code == kExitData);
  CHECK(!r.err.empty());
  CHECK(run({"report", junk.string()}).code == kExitData);

  const auto f = make_files("cli_data2");
  // Too few samples for 5-way 1-shot with 15 queries after asking for 20 queries.
  CHECK(run({"eval", "--base", f.base.string(), "--novel", f.novel.string(), "--n-query", "20"}).code == kExitData);
}

TEST_CASE("gen-synthetic is deterministic") {
  const auto a = make_files("cli_gen_a");
  const auto b = make_files("cli_gen_b");
  CHECK(slurp(a.base) == slurp(b.base));
  CHECK(slurp(a.novel) == slurp(b.novel));
  CHECK(fs::exists(a.base.string() + ".manifest.json"));
}

TEST_CASE("eval outputs") {
  const auto f = make_files("cli_eval");
  const auto out_ind = f.dir / "ind.json";
  const auto out_cbm = f.dir / "cbm.json";
  const std::vector<std::string> common{"--base", f.base.string(), "--novel", f.novel.string(), "--n-tasks", "100",
                                        "--per-task", "--fixed-timing"};
  auto args = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), common.begin(), common.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  REQUIRE(run(args({"eval", "--method", "inductive"}, {"--out", out_ind.string()})).code == kExitOk);
  REQUIRE(run(args({"eval", "--method", "cbm", "--alpha", "1"}, {"--out", out_cbm.string()})).code == kExitOk);
  const auto ji = nlohmann::json::parse(slurp(out_ind));
  const auto jc = nlohmann::json::parse(slurp(out_cbm));
  CHECK(ji["per_task"] == jc["per_task"]);
  CHECK(ji["accuracy"] == jc["accuracy"]);
  CHECK(ji["n_tasks"] == 100);
  CHECK(jc["config"]["softmax"] == true);
  CHECK(jc["elapsed_seconds"] == 0.0);

  SUBCASE("manifest reruns byte-identically") {
    const auto manifest = nlohmann::json::parse(slurp(out_cbm.string() + ".manifest.json"));
    CHECK(manifest["subcommand"] == "eval");
    CHECK(manifest["inputs"].size() == 2);
    CHECK(manifest["inputs"][0]["sha256"] == sha256_file(f.base.string()));
    const auto first = slurp(out_cbm);
    fs::remove(out_cbm);
    const auto argv = manifest["argv"].get<std::vector<std::string>>();
    REQUIRE(run(argv).code == kExitOk);
    CHECK(slurp(out_cbm) == first);
  }
  SUBCASE("stdout output and csv") {
    const auto r = run(args({"eval", "--format", "csv"}, {}));
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("method,variant,", 0) == 0);
    CHECK(r.err.find("manifest: ") != std::string::npos);
  }
  SUBCASE("cached base matrix gives the same result") {
    const auto cached = f.dir / "base_matrix.cbme";
    REQUIRE(run({"base-matrix", "--base", f.base.string(), "--out", cached.string()}).code == kExitOk);
    const auto r = run({"eval", "--base", cached.string(), "--novel", f.novel.string(), "--n-tasks", "100",
                        "--per-task", "--fixed-timing", "--method", "cbm", "--alpha", "1"});
    REQUIRE(r.code == kExitOk);
    // The cached means are stored as binary32, so allow rare flips.
    const double acc = nlohmann::json::parse(r.out)["accuracy"];
    CHECK(std::abs(acc - jc["accuracy"].get<double>()) <= 0.01);
  }
}

TEST_CASE("sweep and report") {
  const auto f = make_files("cli_sweep");
  const auto csv = f.dir / "sweep.csv";
  REQUIRE(run({"sweep", "--base", f.base.string(), "--novel", f.novel.string(), "--n-tasks", "40", "--out",
               csv.string()})
              .code == kExitOk);
  std::ifstream in(csv);
  const auto rows = read_sweep_csv(in);
  CHECK(rows.size() == 21);
  CHECK(fs::exists(csv.string() + ".best.json"));
  const auto best = nlohmann::json::parse(slurp(csv.string() + ".best.json"));
  CHECK(best["accuracy"] == rows.front().accuracy);

  const auto r = run({"report", csv.string()});
  REQUIRE(r.code == kExitOk);
  std::istringstream table(r.out);
  std::string line;
  int lines = 0;
  while (std::getline(table, line)) ++lines;
  CHECK(lines == 22);

  const auto rj = run({"report", "--in", csv.string(), "--format", "json"});
  REQUIRE(rj.code == kExitOk);
  const auto curves = nlohmann::json::parse(rj.out);
  CHECK(curves.size() == 1);
  CHECK(curves[0]["alpha"].size() == 21);

  const auto all = f.dir / "all.csv";
  REQUIRE(run({"sweep", "--base", f.base.string(), "--novel", f.novel.string(), "--n-tasks", "10",
               "--all-variants", "--alpha-grid", "0.5", "--out", all.string()})
              .code == kExitOk);
  std::ifstream in2(all);
  CHECK(read_sweep_csv(in2).size() == 10);
}
