#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "btq/asymptotics.hpp"
#include "btq/cli.hpp"
#include "btq/geometry.hpp"

namespace cli = btq::cli;
namespace asym = btq::asymptotics;
namespace geom = btq::geometry;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run_main(args, out, err);
  return {code, out.str(), err.str()};
}

const fs::path& scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "btq_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_text(const std::string& name, const std::string& content) {
  fs::path p = scratch_dir() / name;
  std::ofstream f(p, std::ios::binary);
  f << content;
  return p;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kTraceConfig =
    "model = round_sphere\n"
    "experiment = trace\n"
    "f = 1\n"
    "ladder = 4,6,8\n";

}  // namespace

TEST_CASE("minimal config fills defaults") {
  cli::CliConfig cfg = cli::parse_config(
      "model = round_sphere\n"
      "experiment = norms\n"
      "f = x3\n");
  CHECK(cfg.spec.model.name() == "round_sphere");
  CHECK(cfg.spec.kind == asym::ExperimentKind::Norms);
  REQUIRE(cfg.spec.observables.size() == 1);
  CHECK(cfg.spec.observables[0] == "x3");
  CHECK(cfg.spec.ladder == asym::default_ladder(cfg.spec.model));
  CHECK(cfg.spec.n_res == 0);
  CHECK(cfg.out_dir == ".");
  CHECK(cfg.spec.thresholds.empty());
}

TEST_CASE("sectioned config equals sectionless config") {
  cli::CliConfig a = cli::parse_config(
      "# comment line\n"
      "[model]\n"
      "kind = deformed_sphere   ; trailing comment\n"
      "epsilon = 0.2\n"
      "\n"
      "[experiment]\n"
      "kind = dirac\n"
      "observables = x1, x2\n"
      "ladder = 8, 12, 16\n"
      "nres = 120\n"
      "out = results\n"
      "[thresholds]\n"
      "rate_min = 0.8\n");
  cli::CliConfig b = cli::parse_config(
      "model = deformed_sphere\n"
      "epsilon = 0.2\n"
      "experiment = dirac\n"
      "f = x1, x2\n"
      "ladder = 8,12,16\n"
      "nres = 120\n"
      "out = results\n");
  CHECK(a.spec.model.name() == b.spec.model.name());
  CHECK(a.spec.kind == asym::ExperimentKind::Dirac);
  CHECK(a.spec.observables == b.spec.observables);
  CHECK(a.spec.ladder == std::vector<int>{8, 12, 16});
  CHECK(b.spec.ladder == std::vector<int>{8, 12, 16});
  CHECK(a.spec.n_res == 120);
  CHECK(a.out_dir == "results");
  CHECK(a.spec.thresholds.at("rate_min") == 0.8);
  CHECK(b.spec.thresholds.empty());
}

TEST_CASE("later keys win") {
  cli::CliConfig cfg = cli::parse_config(
      "model = round_sphere\n"
      "experiment = trace\n"
      "f = x3\n"
      "f = 1\n");
  REQUIRE(cfg.spec.observables.size() == 1);
  CHECK(cfg.spec.observables[0] == "1");
}

TEST_CASE("config rejections") {
  CHECK_THROWS_AS(cli::parse_config("experiment = norms\nf = x3\n"),
                  cli::ValidationError);  // missing model
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nf = x3\n"),
                  cli::ValidationError);  // missing experiment
  CHECK_THROWS_AS(
      cli::parse_config("model = flat_disc\nexperiment = norms\nf = x3\n"),
      cli::ValidationError);
  CHECK_THROWS_AS(
      cli::parse_config("model = round_sphere\nexperiment = bogus\nf = x3\n"),
      cli::ValidationError);
  CHECK_THROWS_AS(
      cli::parse_config("model = round_sphere\nexperiment = norms\nf = nope\n"),
      geom::UnknownObservable);
  // epsilon outside the deformation range handled by the geometry factory
  CHECK_THROWS_AS(cli::parse_config("model = deformed_sphere\nepsilon = 0.5\n"
                                    "experiment = norms\nf = x3\n"),
                  geom::ParameterOutOfRange);
  // parameters that do not belong to the chosen model
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nepsilon = 0.1\n"
                                    "experiment = norms\nf = x3\n"),
                  cli::ValidationError);
  CHECK_THROWS_AS(cli::parse_config("model = torus\nepsilon = 0.1\n"
                                    "experiment = norms\nf = re_f10\n"),
                  cli::ValidationError);
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\ntau_im = 2\n"
                                    "experiment = norms\nf = x3\n"),
                  cli::ValidationError);
  // ladder must increase and stay positive
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nexperiment = trace\n"
                                    "f = 1\nladder = 8,8,12\n"),
                  cli::ValidationError);
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nexperiment = trace\n"
                                    "f = 1\nladder = 0,4\n"),
                  cli::ValidationError);
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nexperiment = trace\n"
                                    "f = 1\nnres = -3\n"),
                  cli::ValidationError);
}

TEST_CASE("unknown keys carry line numbers") {
  try {
    cli::parse_config("model = round_sphere\nwibble = 3\n");
    FAIL("expected UnknownKey");
  } catch (const cli::UnknownKey& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("wibble") != std::string::npos);
  }
  CHECK_THROWS_AS(cli::parse_config("[thresholds]\nnot_a_threshold = 1\n"),
                  cli::UnknownKey);
  // model-section keys do not leak into [experiment]
  CHECK_THROWS_AS(
      cli::parse_config("[experiment]\nepsilon = 0.1\n"), cli::UnknownKey);
}

TEST_CASE("malformed lines raise parse errors") {
  CHECK_THROWS_AS(cli::parse_config("model round_sphere\n"), cli::ParseError);
  CHECK_THROWS_AS(cli::parse_config("[model\nkind = torus\n"), cli::ParseError);
  CHECK_THROWS_AS(cli::parse_config("[nonsense]\n"), cli::ParseError);
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nnres = twelve\n"),
                  cli::ParseError);
  CHECK_THROWS_AS(cli::parse_config("model = round_sphere\nnres = 12.5\n"),
                  cli::ParseError);
  CHECK_THROWS_AS(cli::parse_config("[thresholds]\nc0_tol = 1e-3 oops\n"),
                  cli::ParseError);
  CHECK_THROWS_AS(cli::parse_config("= 3\n"), cli::ParseError);
}

TEST_CASE("torus defaults to the square lattice") {
  cli::CliConfig cfg = cli::parse_config(
      "model = torus\n"
      "experiment = trace\n"
      "f = 1\n");
  CHECK(cfg.spec.model.kind() == geom::ModelKind::Torus);
  CHECK(cfg.spec.model.name().rfind("torus", 0) == 0);
  CHECK(cfg.spec.ladder == asym::default_ladder(cfg.spec.model));
}

TEST_CASE("run writes reports and exits zero on success") {
  fs::path config = write_text("trace.cfg", kTraceConfig);
  fs::path out_dir = scratch_dir() / "trace_run";
  auto res = run_cli({"run", config.string(), "--out", out_dir.string()});
  CHECK(res.err == "");
  CHECK(res.code == 0);
  CHECK(res.out.find("PASS") != std::string::npos);

  json j = json::parse(read_text(out_dir / "report.json"));
  CHECK(j["schema"] == "btq-report-v1");
  CHECK(j["model"] == "round_sphere");
  CHECK(j["kind"] == "trace");
  CHECK(j["ladder"] == json::array({4, 6, 8}));
  CHECK(j["pass"] == true);
  REQUIRE(j["checks"].size() == 1);
  CHECK(j["checks"][0]["name"] == "trace.counting_identity");
  CHECK(j["checks"][0]["pass"] == true);
  std::string last_key;
  for (const auto& item : j.items()) last_key = item.key();
  CHECK(last_key == "timing");

  std::string samples = read_text(out_dir / "samples.csv");
  CHECK(samples.rfind("series,m,raw,fitted,residual,threshold,pass\n", 0) == 0);
  CHECK(samples.find("trace_gap[1],4,") != std::string::npos);
  std::string fits = read_text(out_dir / "fits.csv");
  CHECK(fits.rfind("series,order,coeff_index,coeff_re,coeff_im,residual,rate\n",
                   0) == 0);
}

TEST_CASE("threshold override fails the run but still writes the report") {
  fs::path config = write_text("trace_fail.cfg", std::string(kTraceConfig) +
                                                     "[thresholds]\n"
                                                     "unit_tol = -1\n");
  fs::path out_dir = scratch_dir() / "trace_fail";
  auto res = run_cli({"run", config.string(), "--out", out_dir.string()});
  CHECK(res.code == 2);
  CHECK(res.out.find("THRESHOLD FAILURE") != std::string::npos);
  json j = json::parse(read_text(out_dir / "report.json"));
  CHECK(j["pass"] == false);
  CHECK(j["thresholds"]["unit_tol"] == -1.0);
  CHECK(j["checks"][0]["pass"] == false);
}

TEST_CASE("reruns are byte-identical outside the timing block") {
  fs::path config = write_text("trace_det.cfg", kTraceConfig);
  fs::path dir_a = scratch_dir() / "det_a";
  fs::path dir_b = scratch_dir() / "det_b";
  CHECK(run_cli({"run", config.string(), "--out", dir_a.string()}).code == 0);
  CHECK(run_cli({"run", config.string(), "--out", dir_b.string()}).code == 0);
  CHECK(read_text(dir_a / "samples.csv") == read_text(dir_b / "samples.csv"));
  CHECK(read_text(dir_a / "fits.csv") == read_text(dir_b / "fits.csv"));
  std::string ja = read_text(dir_a / "report.json");
  std::string jb = read_text(dir_b / "report.json");
  size_t cut_a = ja.find("\"timing\"");
  size_t cut_b = jb.find("\"timing\"");
  REQUIRE(cut_a != std::string::npos);
  REQUIRE(cut_a == cut_b);
  CHECK(ja.substr(0, cut_a) == jb.substr(0, cut_b));
}

TEST_CASE("command-line overrides take precedence") {
  fs::path config = write_text("trace_override.cfg", kTraceConfig);
  fs::path out_dir = scratch_dir() / "trace_override";
  auto res = run_cli({"run", config.string(), "--out", out_dir.string(),
                      "--ladder", "3,5", "--jobs", "2"});
  CHECK(res.code == 0);
  json j = json::parse(read_text(out_dir / "report.json"));
  CHECK(j["ladder"] == json::array({3, 5}));
  CHECK(j["samples"].size() == 2);

  auto bad = run_cli({"run", config.string(), "--out", out_dir.string(),
                      "--ladder", "5,3"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("btq: cli:") != std::string::npos);
}

TEST_CASE("seedless flag is reserved and takes no value") {
  fs::path config = write_text("trace_seedless.cfg", kTraceConfig);
  fs::path out_dir = scratch_dir() / "trace_seedless";
  auto ok = run_cli({"run", config.string(), "--out", out_dir.string(),
                     "--seedless"});
  CHECK(ok.code == 0);
  auto bad = run_cli({"run", config.string(), "--out", out_dir.string(),
                      "--seedless=1"});
  CHECK(bad.code == 1);
}

TEST_CASE("list-models names every model") {
  auto res = run_cli({"list-models"});
  CHECK(res.code == 0);
  CHECK(res.out.find("round_sphere") != std::string::npos);
  CHECK(res.out.find("deformed_sphere") != std::string::npos);
  CHECK(res.out.find("torus") != std::string::npos);
}

TEST_CASE("list-observables matches the geometry registry") {
  auto res = run_cli({"list-observables", "round_sphere"});
  CHECK(res.code == 0);
  std::vector<std::string> names;
  std::stringstream ss(res.out);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) names.push_back(line);
  auto obs = geom::builtin_observables(geom::KahlerModel::round_sphere());
  REQUIRE(names.size() == obs.size());
  for (size_t i = 0; i < obs.size(); ++i) CHECK(names[i] == obs[i].name);

  auto bad = run_cli({"list-observables", "flat_disc"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("unknown model") != std::string::npos);
}

TEST_CASE("report re-renders a written directory") {
  fs::path config = write_text("trace_report.cfg", kTraceConfig);
  fs::path out_dir = scratch_dir() / "trace_report";
  REQUIRE(run_cli({"run", config.string(), "--out", out_dir.string()}).code == 0);
  auto res = run_cli({"report", out_dir.string()});
  CHECK(res.code == 0);
  CHECK(res.out.find("trace.counting_identity") != std::string::npos);
  CHECK(res.out.find("PASS") != std::string::npos);

  auto missing = run_cli({"report", (scratch_dir() / "no_such_dir").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("btq:") != std::string::npos);

  fs::path garbled = scratch_dir() / "garbled";
  fs::create_directories(garbled);
  write_text("garbled/report.json", "{ not json");
  auto broken = run_cli({"report", garbled.string()});
  CHECK(broken.code == 1);
}

TEST_CASE("bad invocations exit with an error") {
  auto missing_config = run_cli({"run", (scratch_dir() / "nope.cfg").string()});
  CHECK(missing_config.code == 1);
  CHECK(missing_config.err.find("cannot read config") != std::string::npos);

  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"run"}).code == 1);

  fs::path config = write_text("trace_jobs.cfg", kTraceConfig);
  auto bad_jobs = run_cli({"run", config.string(), "--jobs", "0", "--out",
                           (scratch_dir() / "jobs0").string()});
  CHECK(bad_jobs.code == 1);
  CHECK(bad_jobs.err.find("--jobs") != std::string::npos);
}

TEST_CASE("config errors print with module provenance") {
  fs::path config = write_text("bad_model.cfg",
                               "model = deformed_sphere\n"
                               "epsilon = 0.9\n"
                               "experiment = norms\n"
                               "f = x3\n");
  auto res = run_cli({"run", config.string()});
  CHECK(res.code == 1);
  CHECK(res.err.rfind("btq: geometry:", 0) == 0);

  fs::path unknown = write_text("bad_key.cfg",
                                "model = round_sphere\n"
                                "experiment = norms\n"
                                "f = x3\n"
                                "wibble = 1\n");
  auto res2 = run_cli({"run", unknown.string()});
  CHECK(res2.code == 1);
  CHECK(res2.err.rfind("btq: cli:", 0) == 0);
  CHECK(res2.err.find("line 4") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  auto res = run_cli({"--help"});
  CHECK(res.code == 0);
  CHECK(res.out.find("run") != std::string::npos);
}
