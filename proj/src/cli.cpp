#include "btq/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "btq/acceptance.hpp"
#include "btq/geometry.hpp"
#include "btq/numerics.hpp"

namespace btq::cli {

namespace asym = btq::asymptotics;
namespace geom = btq::geometry;
using json = nlohmann::ordered_json;

namespace {

template <typename... Args>
std::string strf(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return std::string(buf);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s, int line, const std::string& key) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw ParseError(strf("config line %d: value of '%s' is not a number: '%s'",
                          line, key.c_str(), s.c_str()));
  }
  if (trim(s.substr(pos)) != "")
    throw ParseError(strf("config line %d: trailing text after number in '%s'",
                          line, key.c_str()));
  return v;
}

int parse_int(const std::string& s, int line, const std::string& key) {
  double v = parse_double(s, line, key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ParseError(strf("config line %d: '%s' must be an integer", line,
                          key.c_str()));
  return i;
}

std::vector<int> parse_ladder(const std::string& s, int line) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) out.push_back(parse_int(item, line, "ladder"));
  return out;
}

const std::vector<std::string>& known_threshold_keys() {
  static const std::vector<std::string> keys{
      "c0_tol",   "upper_slack", "rate_min",  "first_order_rel",
      "routes_tol", "antisymmetry_rel", "c0_rel", "remainder_rate_min",
      "unit_tol", "gap_bound",   "top_bound", "affine_tol",
      "c0_band",  "band_rel",    "flat_tol"};
  return keys;
}

std::optional<asym::ExperimentKind> kind_from_name(const std::string& name) {
  using K = asym::ExperimentKind;
  for (K k : {K::Norms, K::Dirac, K::Product, K::Berezin, K::Star, K::Trace,
              K::Spectral, K::UmExpand, K::FsPullback})
    if (name == asym::kind_name(k)) return k;
  return std::nullopt;
}

struct RawConfig {
  std::optional<std::string> model_kind, exp_kind, out;
  std::optional<double> epsilon, tau_re, tau_im;
  std::optional<std::vector<std::string>> observables;
  std::optional<std::vector<int>> ladder;
  std::optional<int> nres;
  std::map<std::string, double> thresholds;
};

void apply_key(RawConfig& raw, const std::string& section, const std::string& key,
               const std::string& value, int line) {
  auto unknown = [&] {
    std::string where = section.empty() ? "top level" : "[" + section + "]";
    throw UnknownKey(strf("config line %d: unknown key '%s' at %s", line,
                          key.c_str(), where.c_str()));
  };
  if (section == "thresholds") {
    const auto& keys = known_threshold_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) unknown();
    raw.thresholds[key] = parse_double(value, line, key);
    return;
  }
  bool top = section.empty(), model = section == "model",
       experiment = section == "experiment";
  if ((top && key == "model") || (model && key == "kind")) {
    raw.model_kind = value;
  } else if ((top || model) && key == "epsilon") {
    raw.epsilon = parse_double(value, line, key);
  } else if ((top || model) && key == "tau_re") {
    raw.tau_re = parse_double(value, line, key);
  } else if ((top || model) && key == "tau_im") {
    raw.tau_im = parse_double(value, line, key);
  } else if ((top && key == "experiment") || (experiment && key == "kind")) {
    raw.exp_kind = value;
  } else if ((top || experiment) && (key == "f" || key == "observables")) {
    raw.observables = split_list(value);
  } else if ((top || experiment) && key == "ladder") {
    raw.ladder = parse_ladder(value, line);
  } else if ((top || experiment) && key == "nres") {
    raw.nres = parse_int(value, line, key);
  } else if ((top || experiment) && key == "out") {
    raw.out = value;
  } else {
    unknown();
  }
}

geom::KahlerModel build_model(const RawConfig& raw) {
  if (!raw.model_kind)
    throw ValidationError("config: missing model kind (set 'model = ...')");
  const std::string& kind = *raw.model_kind;
  auto reject = [&](bool cond, const char* what) {
    if (cond)
      throw ValidationError(strf("config: '%s' does not apply to model '%s'",
                                 what, kind.c_str()));
  };
  if (kind == "round_sphere") {
    reject(raw.epsilon.has_value(), "epsilon");
    reject(raw.tau_re.has_value() || raw.tau_im.has_value(), "tau");
    return geom::KahlerModel::round_sphere();
  }
  if (kind == "deformed_sphere") {
    reject(raw.tau_re.has_value() || raw.tau_im.has_value(), "tau");
    return geom::KahlerModel::deformed_sphere(raw.epsilon.value_or(0.1));
  }
  if (kind == "torus") {
    reject(raw.epsilon.has_value(), "epsilon");
    return geom::KahlerModel::torus(
        cdouble(raw.tau_re.value_or(0.0), raw.tau_im.value_or(1.0)));
  }
  throw ValidationError(strf("config: unknown model kind '%s'", kind.c_str()));
}

}  // namespace

CliConfig parse_config(const std::string& text) {
  RawConfig raw;
  std::string section;
  std::stringstream ss(text);
  std::string line_text;
  int line = 0;
  while (std::getline(ss, line_text)) {
    ++line;
    size_t comment = line_text.find_first_of("#;");
    if (comment != std::string::npos) line_text = line_text.substr(0, comment);
    std::string t = trim(line_text);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ParseError(strf("config line %d: malformed section header", line));
      section = trim(t.substr(1, t.size() - 2));
      if (section != "model" && section != "experiment" && section != "thresholds")
        throw ParseError(strf("config line %d: unknown section '[%s]'", line,
                              section.c_str()));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError(strf("config line %d: expected 'key = value'", line));
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ParseError(strf("config line %d: empty key", line));
    apply_key(raw, section, key, value, line);
  }

  CliConfig cfg;
  cfg.spec.model = build_model(raw);
  if (!raw.exp_kind)
    throw ValidationError("config: missing experiment kind (set 'experiment = ...')");
  auto kind = kind_from_name(*raw.exp_kind);
  if (!kind)
    throw ValidationError(
        strf("config: unknown experiment kind '%s'", raw.exp_kind->c_str()));
  cfg.spec.kind = *kind;
  if (raw.observables) {
    for (const auto& name : *raw.observables)
      geom::find_observable(cfg.spec.model, name);  // UnknownObservable on miss
    cfg.spec.observables = *raw.observables;
  }
  cfg.spec.ladder = raw.ladder ? *raw.ladder : asym::default_ladder(cfg.spec.model);
  for (size_t i = 1; i < cfg.spec.ladder.size(); ++i)
    if (cfg.spec.ladder[i] <= cfg.spec.ladder[i - 1])
      throw ValidationError("config: ladder must be strictly increasing");
  if (cfg.spec.ladder.empty() || cfg.spec.ladder.front() < 1)
    throw ValidationError("config: ladder levels must be >= 1");
  if (raw.nres) {
    if (*raw.nres < 0) throw ValidationError("config: nres must be >= 0");
    cfg.spec.n_res = *raw.nres;
  }
  cfg.spec.thresholds = raw.thresholds;
  if (raw.out) cfg.out_dir = *raw.out;
  return cfg;
}

namespace {

// ---- serialization ---------------------------------------------------------

json report_to_json(const asym::Report& rep,
                    const std::map<std::string, double>& thresholds) {
  json j;
  j["schema"] = "btq-report-v1";
  j["model"] = rep.model;
  j["kind"] = rep.kind;
  j["observables"] = rep.observables;
  j["ladder"] = rep.ladder;
  j["thresholds"] = thresholds;
  j["samples"] = json::array();
  for (const auto& s : rep.samples)
    j["samples"].push_back({{"series", s.series}, {"m", s.m}, {"value", s.value}});
  j["fits"] = json::array();
  for (const auto& f : rep.fits)
    j["fits"].push_back({{"series", f.series},
                         {"order", f.order},
                         {"coeff_re", f.coeff_re},
                         {"coeff_im", f.coeff_im},
                         {"residual", f.residual},
                         {"rate", f.rate}});
  j["checks"] = json::array();
  for (const auto& c : rep.checks)
    j["checks"].push_back({{"name", c.name},
                           {"value", c.value},
                           {"threshold", c.threshold},
                           {"relation", c.relation},
                           {"pass", c.pass}});
  j["levels"] = json::array();
  for (const auto& l : rep.levels)
    j["levels"].push_back({{"m", l.m},
                           {"n_res", l.n_res},
                           {"ortho_defect", l.ortho_defect},
                           {"resolution_drift", l.resolution_drift},
                           {"retried", l.retried}});
  j["pass"] = rep.pass;
  // wall-clock content is confined to this trailing block
  json cells = json::array();
  for (const auto& [label, secs] : rep.timing)
    cells.push_back({{"label", label}, {"seconds", secs}});
  j["timing"] = {{"cells", cells}, {"wall_total", rep.wall_total}};
  return j;
}

json acceptance_to_json(const acceptance::AcceptanceReport& rep) {
  json j;
  j["schema"] = "btq-acceptance-v1";
  j["criteria"] = json::array();
  for (const auto& c : rep.criteria)
    j["criteria"].push_back({{"id", c.id},
                             {"name", c.name},
                             {"pass", c.pass},
                             {"value", c.value},
                             {"threshold", c.threshold},
                             {"relation", c.relation}});
  j["all_pass"] = rep.all_pass;
  json details = json::array();
  for (const auto& c : rep.criteria)
    details.push_back({{"id", c.id}, {"seconds", c.seconds}, {"detail", c.detail}});
  j["timing"] = {{"criteria", details}, {"wall_total", rep.wall_total}};
  return j;
}

// Finds the check a series reports against: bracket-tag match first, then the
// longest shared prefix once separators are normalized, then the first check.
const asym::CheckRow* series_check(const asym::Report& rep, const std::string& series) {
  if (rep.checks.empty()) return nullptr;
  size_t lb = series.find('[');
  if (lb != std::string::npos) {
    std::string tag = series.substr(lb);  // includes brackets
    for (const auto& c : rep.checks)
      if (c.name.find(tag) != std::string::npos) return &c;
  }
  auto normalize = [](const std::string& s) {
    std::string out;
    for (char ch : s)
      out += (ch == '.' || ch == '_' || ch == '[' || ch == ']' || ch == ',')
                 ? ' '
                 : ch;
    return out;
  };
  std::string ns = normalize(series);
  const asym::CheckRow* best = &rep.checks.front();
  size_t best_len = 0;
  for (const auto& c : rep.checks) {
    std::string nc = normalize(c.name);
    size_t len = 0;
    while (len < ns.size() && len < nc.size() && ns[len] == nc[len]) ++len;
    if (len > best_len) {
      best_len = len;
      best = &c;
    }
  }
  return best;
}

std::string samples_csv(const asym::Report& rep) {
  std::string out = "series,m,raw,fitted,residual,threshold,pass\n";
  for (const auto& s : rep.samples) {
    const asym::FitRow* fit = nullptr;
    for (const auto& f : rep.fits)
      if (f.series == s.series) {
        fit = &f;
        break;
      }
    out += s.series + "," + std::to_string(s.m) + "," + strf("%.17g", s.value);
    if (fit && !fit->coeff_re.empty()) {
      double x = 1.0 / s.m, xp = 1.0, fitted = 0;
      for (double c : fit->coeff_re) {
        fitted += c * xp;
        xp *= x;
      }
      out += strf(",%.17g,%.17g", fitted, std::abs(s.value - fitted));
    } else {
      out += ",,";
    }
    if (const auto* c = series_check(rep, s.series))
      out += strf(",%.17g,%d", c->threshold, c->pass ? 1 : 0);
    else
      out += ",,";
    out += "\n";
  }
  return out;
}

std::string fits_csv(const asym::Report& rep) {
  std::string out = "series,order,coeff_index,coeff_re,coeff_im,residual,rate\n";
  for (const auto& f : rep.fits) {
    if (f.coeff_re.empty())
      out += strf("%s,%d,,,,%.17g,%.17g\n", f.series.c_str(), f.order, f.residual,
                  f.rate);
    for (size_t i = 0; i < f.coeff_re.size(); ++i)
      out += strf("%s,%d,%zu,%.17g,%.17g,%.17g,%.17g\n", f.series.c_str(), f.order,
                  i, f.coeff_re[i], f.coeff_im[i], f.residual, f.rate);
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f.good()) throw std::runtime_error("write failed for " + path.string());
}

void print_experiment_summary(std::ostream& out, const asym::Report& rep) {
  out << "model=" << rep.model << " kind=" << rep.kind;
  if (!rep.observables.empty()) {
    out << " observables=";
    for (size_t i = 0; i < rep.observables.size(); ++i)
      out << (i ? "," : "") << rep.observables[i];
  }
  out << " ladder=";
  for (size_t i = 0; i < rep.ladder.size(); ++i)
    out << (i ? "," : "") << rep.ladder[i];
  out << "\n";
  for (const auto& c : rep.checks)
    out << strf("  %-34s %12.4g %s %-10.4g %s\n", c.name.c_str(), c.value,
                c.relation.c_str(), c.threshold, c.pass ? "PASS" : "FAIL");
  out << (rep.pass ? "PASS" : "THRESHOLD FAILURE") << "\n";
}

// ---- subcommands -----------------------------------------------------------

int do_run(const std::string& config_path, const std::string& out_override,
           const std::string& ladder_override, int nres_override, int jobs,
           std::ostream& out) {
  std::ifstream f(config_path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot read config '" + config_path + "'");
  }
  std::stringstream buf;
  buf << f.rdbuf();
  CliConfig cfg = parse_config(buf.str());
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (!ladder_override.empty()) {
    cfg.spec.ladder = parse_ladder(ladder_override, 0);
    for (size_t i = 1; i < cfg.spec.ladder.size(); ++i)
      if (cfg.spec.ladder[i] <= cfg.spec.ladder[i - 1])
        throw ValidationError("--ladder must be strictly increasing");
    if (cfg.spec.ladder.empty() || cfg.spec.ladder.front() < 1)
      throw ValidationError("--ladder levels must be >= 1");
  }
  if (nres_override >= 0) cfg.spec.n_res = nres_override;

  auto rep = asym::run_experiment(cfg.spec, nullptr, jobs);

  std::filesystem::create_directories(cfg.out_dir);
  std::filesystem::path dir(cfg.out_dir);
  write_file(dir / "report.json",
             report_to_json(rep, cfg.spec.thresholds).dump(2) + "\n");
  write_file(dir / "samples.csv", samples_csv(rep));
  write_file(dir / "fits.csv", fits_csv(rep));

  print_experiment_summary(out, rep);
  out << "wrote " << (dir / "report.json").string() << ", "
      << (dir / "samples.csv").string() << ", " << (dir / "fits.csv").string()
      << "\n";
  return rep.pass ? 0 : 2;
}

int do_verify(const std::string& out_dir, int jobs, std::ostream& out) {
  auto rep = acceptance::run_acceptance(jobs);
  out << acceptance::format_table(rep);
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  write_file(dir / "report.json", acceptance_to_json(rep).dump(2) + "\n");
  out << "wrote " << (dir / "report.json").string() << "\n";
  return rep.all_pass ? 0 : 2;
}

int do_list_models(std::ostream& out) {
  out << "round_sphere     no parameters\n";
  out << "deformed_sphere  epsilon (default 0.1, |epsilon| <= 0.3)\n";
  out << "torus            tau_re, tau_im (default 0, 1; tau_im > 0)\n";
  return 0;
}

int do_list_observables(const std::string& model_name, std::ostream& out) {
  RawConfig raw;
  raw.model_kind = model_name;
  geom::KahlerModel model = build_model(raw);
  for (const auto& obs : geom::builtin_observables(model)) out << obs.name << "\n";
  return 0;
}

int do_report(const std::string& dir, std::ostream& out) {
  std::filesystem::path path = std::filesystem::path(dir) / "report.json";
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path.string() + "'");
  json j = json::parse(f);  // throws on malformed input
  if (j.contains("criteria")) {
    for (const auto& c : j["criteria"])
      out << strf("%-4d %-26s %-6s %12.4g %3s %-.4g\n", c["id"].get<int>(),
                  c["name"].get<std::string>().c_str(),
                  c["pass"].get<bool>() ? "PASS" : "FAIL",
                  c["value"].get<double>(),
                  c["relation"].get<std::string>().c_str(),
                  c["threshold"].get<double>());
    out << (j["all_pass"].get<bool>() ? "PASS" : "FAIL") << "\n";
    return 0;
  }
  asym::Report rep;
  rep.model = j["model"].get<std::string>();
  rep.kind = j["kind"].get<std::string>();
  for (const auto& o : j["observables"]) rep.observables.push_back(o.get<std::string>());
  for (const auto& m : j["ladder"]) rep.ladder.push_back(m.get<int>());
  for (const auto& c : j["checks"])
    rep.checks.push_back({c["name"].get<std::string>(), c["value"].get<double>(),
                          c["threshold"].get<double>(),
                          c["relation"].get<std::string>(), c["pass"].get<bool>()});
  rep.pass = j["pass"].get<bool>();
  print_experiment_summary(out, rep);
  return 0;
}

}  // namespace

int run_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"semiclassical operator laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_override, ladder_override, model_name, report_dir;
  int jobs = 1, nres_override = -1;
  bool seedless = false;

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "config file path")->required();
  run->add_option("--jobs", jobs, "max concurrent level builds");
  run->add_option("--out", out_override, "output directory");
  run->add_option("--ladder", ladder_override, "comma-separated level ladder");
  run->add_option("--nres", nres_override, "resolution override (0 = default policy)");
  run->add_flag("--seedless", seedless, "reserved; no randomness is used anywhere")
      ->disable_flag_override();

  auto* verify = app.add_subcommand("verify", "run the full verification suite");
  std::string verify_out = ".";
  int verify_jobs = 1;
  verify->add_option("--jobs", verify_jobs, "max concurrent level builds");
  verify->add_option("--out", verify_out, "output directory");
  verify->add_flag("--seedless", seedless, "reserved; no randomness is used anywhere")
      ->disable_flag_override();

  auto* lm = app.add_subcommand("list-models", "list the available models");
  auto* lo = app.add_subcommand("list-observables", "list observables for a model");
  lo->add_option("model", model_name, "model name")->required();
  auto* rp = app.add_subcommand("report", "render a written report directory");
  rp->add_option("dir", report_dir, "directory holding report.json")->required();

  std::vector<const char*> argv;
  argv.push_back("btq");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (jobs < 1 || verify_jobs < 1) throw ValidationError("--jobs must be >= 1");
    if (*run) return do_run(config_path, out_override, ladder_override,
                            nres_override, jobs, out);
    if (*verify) return do_verify(verify_out, verify_jobs, out);
    if (*lm) return do_list_models(out);
    if (*lo) return do_list_observables(model_name, out);
    if (*rp) return do_report(report_dir, out);
  } catch (const ParseError& e) {
    err << "btq: cli: " << e.what() << "\n";
    return 1;
  } catch (const UnknownKey& e) {
    err << "btq: cli: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "btq: cli: " << e.what() << "\n";
    return 1;
  } catch (const geom::ParameterOutOfRange& e) {
    err << "btq: geometry: " << e.what() << "\n";
    return 1;
  } catch (const geom::UnknownObservable& e) {
    err << "btq: geometry: " << e.what() << "\n";
    return 1;
  } catch (const numerics::NoConvergence& e) {
    err << "btq: numerics: " << e.what() << "\n";
    return 1;
  } catch (const numerics::NotPositiveDefinite& e) {
    err << "btq: numerics: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "btq: report: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "btq: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace btq::cli
