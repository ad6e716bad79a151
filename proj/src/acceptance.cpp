#include "btq/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "btq/asymptotics.hpp"
#include "btq/coherent.hpp"
#include "btq/geometry.hpp"
#include "btq/hilbert.hpp"
#include "btq/numerics.hpp"
#include "btq/operators.hpp"

namespace btq::acceptance {

namespace asym = btq::asymptotics;
namespace geom = btq::geometry;
using geom::KahlerModel;
using geom::Observable;

namespace {

template <typename... Args>
std::string strf(const char* fmt, Args... args) {
  char buf[768];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return std::string(buf);
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Finds the first check whose name starts with `prefix`; null when absent.
const asym::CheckRow* find_check(const asym::Report& rep, std::string_view prefix) {
  for (const auto& c : rep.checks)
    if (std::string_view(c.name).substr(0, prefix.size()) == prefix) return &c;
  return nullptr;
}

double check_value(const asym::Report& rep, std::string_view prefix) {
  const auto* c = find_check(rep, prefix);
  return c ? c->value : std::nan("");
}

bool check_pass(const asym::Report& rep, std::string_view prefix) {
  const auto* c = find_check(rep, prefix);
  return c && c->pass;
}

struct Ctx {
  asym::LevelCache round{KahlerModel::round_sphere()};
  asym::LevelCache deformed{KahlerModel::deformed_sphere(0.1)};
  asym::LevelCache torus{KahlerModel::torus(cdouble(0.0, 1.0))};
  int jobs = 1;

  asym::Report run(const KahlerModel& model, asym::LevelCache& cache,
                   asym::ExperimentKind kind, std::vector<std::string> obs,
                   std::vector<int> ladder = {}) {
    asym::ExperimentSpec spec;
    spec.model = model;
    spec.kind = kind;
    spec.observables = std::move(obs);
    spec.ladder = std::move(ladder);
    return asym::run_experiment(spec, &cache, jobs);
  }
};

CriterionResult criterion_fuzzy_diagonal(Ctx& ctx) {
  Timer t;
  // private cache so the quoted runtime covers the level builds themselves
  asym::LevelCache cache(KahlerModel::round_sphere());
  std::vector<int> ms{2, 4, 8, 16, 32};
  cache.prebuild(ms, ctx.jobs);
  Observable x3 = geom::find_observable(cache.model(), "x3");
  double worst = 0;
  for (int m : ms) {
    auto op = operators::toeplitz(cache.level(m), x3);
    for (int j = 0; j <= m; ++j)
      for (int k = 0; k <= m; ++k) {
        double want = (j == k) ? (2.0 * k - m) / (m + 2.0) : 0.0;
        worst = std::max(worst, std::abs(op.matrix.at(j, k) - want));
      }
  }
  double secs = t.seconds();
  CriterionResult r{1, "fuzzy_sphere_diagonal", worst <= 1e-9 && secs < 10.0,
                    worst, 1e-9, "<=",
                    strf("worst entry deviation %.3g over m={2,4,8,16,32}; "
                         "build+check %.2fs (<10s)", worst, secs),
                    secs};
  return r;
}

CriterionResult criterion_norm_limit(Ctx& ctx) {
  Timer t;
  auto rep = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Norms,
                     {"x1", "x3", "x3sq"});
  double worst_c0 = 0;
  for (const auto& c : rep.checks)
    if (c.name.rfind("norms.c0_matches_sup", 0) == 0)
      worst_c0 = std::max(worst_c0, c.value);
  return {2, "operator_norm_limit", rep.pass, worst_c0, 1e-3, "<=",
          strf("x1/x3/x3sq on the default ladder: worst |c0-sup|=%.3g; "
               "sup-4/m lower and sup+1e-9 upper bounds %s",
               worst_c0, rep.pass ? "hold" : "VIOLATED"),
          t.seconds()};
}

CriterionResult criterion_bracket_rate(Ctx& ctx) {
  Timer t;
  auto rep = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Dirac,
                     {"x1", "x2"});
  double rate = rep.fits.empty() ? -999.0 : rep.fits.back().rate;
  double d_first = 0, d_last = 0;
  for (const auto& s : rep.samples) {
    if (s.m == rep.ladder.front()) d_first = s.value;
    if (s.m == rep.ladder.back()) d_last = s.value;
  }
  return {3, "bracket_commutator_rate", rep.pass, rate, 0.9, ">=",
          strf("(x1,x2) commutator-vs-bracket defect: rate %.3f, "
               "defect %.3g@m=%d -> %.3g@m=%d",
               rate, d_first, rep.ladder.front(), d_last, rep.ladder.back()),
          t.seconds()};
}

CriterionResult criterion_product_rate(Ctx& ctx) {
  Timer t;
  auto rep1 = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Product,
                      {"x1", "x2"});
  auto rep2 = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Product,
                      {"x3", "x3"});
  double r1 = rep1.fits.empty() ? -999.0 : rep1.fits.back().rate;
  double r2 = rep2.fits.empty() ? -999.0 : rep2.fits.back().rate;
  return {4, "product_rule_rate", rep1.pass && rep2.pass, std::min(r1, r2), 0.9,
          ">=", strf("product defect rates: (x1,x2) %.3f, (x3,x3) %.3f", r1, r2),
          t.seconds()};
}

CriterionResult criterion_berezin_closed(Ctx& ctx) {
  Timer t;
  const KahlerModel& model = ctx.round.model();
  Observable x3 = geom::find_observable(model, "x3");
  auto pts = geom::test_points(model, 12);
  std::vector<int> ms{8, 16, 32};
  ctx.round.prebuild(ms, ctx.jobs);
  double worst_sym = 0, worst_int = 0;
  for (int m : ms) {
    const auto& lvl = ctx.round.level(m);
    auto sym = coherent::berezin_transform(lvl, x3, pts,
                                           coherent::BerezinRoute::Symbolic);
    auto integ = coherent::berezin_transform(lvl, x3, pts,
                                             coherent::BerezinRoute::Integral);
    for (size_t i = 0; i < pts.size(); ++i) {
      cdouble want = (m / (m + 2.0)) * x3.value(pts[i]);
      worst_sym = std::max(worst_sym, std::abs(sym[i] - want));
      worst_int = std::max(worst_int, std::abs(integ[i] - want));
    }
  }
  // route agreement on a fixed generic smooth observable
  Observable generic = geom::obs_add(
      geom::find_observable(model, "x1"),
      geom::obs_add(geom::obs_scale(0.7, geom::find_observable(model, "x3sq")),
                    geom::obs_scale(0.3, geom::find_observable(model, "y2_yz"))));
  const auto& lvl16 = ctx.round.level(16);
  auto s16 = coherent::berezin_transform(lvl16, generic, pts,
                                         coherent::BerezinRoute::Symbolic);
  auto i16 = coherent::berezin_transform(lvl16, generic, pts,
                                         coherent::BerezinRoute::Integral);
  double agree = 0;
  for (size_t i = 0; i < pts.size(); ++i)
    agree = std::max(agree, std::abs(s16[i] - i16[i]));
  bool pass = worst_sym <= 1e-8 && worst_int <= 1e-6 && agree <= 1e-8;
  return {5, "berezin_closed_form", pass, worst_sym, 1e-8, "<=",
          strf("x3 transform vs (m/(m+2))x3: symbolic %.3g (<=1e-8), "
               "integral %.3g (<=1e-6); routes agree %.3g (<=1e-8)",
               worst_sym, worst_int, agree),
          t.seconds()};
}

CriterionResult criterion_berezin_first_order(Ctx& ctx) {
  Timer t;
  std::vector<int> ladder{8, 12, 16, 24, 32};
  auto rep1 = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Berezin,
                      {"x3"}, ladder);
  auto rep2 = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Berezin,
                      {"y2_z2"}, ladder);
  double v1 = check_value(rep1, "berezin.first_order");
  double v2 = check_value(rep2, "berezin.first_order");
  return {6, "berezin_first_order", rep1.pass && rep2.pass, std::max(v1, v2),
          0.05, "<=",
          strf("m(If-f) extrapolated onto the laplacian: rel dev x3 %.3g, "
               "y2_z2 %.3g", v1, v2),
          t.seconds()};
}

void criteria_star(Ctx& ctx, AcceptanceReport& out) {
  Timer t;
  auto rep = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Star,
                     {"x1", "x2"});
  bool anti = check_pass(rep, "star.antisymmetry");
  bool nul = check_pass(rep, "star.null_on_constants");
  out.criteria.push_back(
      {7, "star_c1_antisymmetry", anti && nul,
       check_value(rep, "star.antisymmetry"), 0.05, "<=",
       strf("c1(f,g)-c1(g,f) vs -i{f,g} rel dev %.3g at 10 grid points; "
            "c1(1,g) worst %.3g within fit residual %s; c0 identity rel %.3g",
            check_value(rep, "star.antisymmetry"),
            check_value(rep, "star.null_on_constants"), nul ? "(ok)" : "(FAIL)",
            check_value(rep, "star.c0_identity")),
       t.seconds()});
  out.criteria.push_back(
      {8, "star_remainder_rate", check_pass(rep, "star.remainder_rate"),
       check_value(rep, "star.remainder_rate"), 1.8, ">=",
       strf("|TfTg - Tfg - (1/m)T_c1hat| rate %.3f (shares the star run "
            "timed under #7)", check_value(rep, "star.remainder_rate")),
       0.0});
}

CriterionResult criterion_kernel_density(Ctx& ctx) {
  Timer t;
  auto rep_round =
      ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::UmExpand, {});
  auto rep_def = ctx.run(ctx.deformed.model(), ctx.deformed,
                         asym::ExperimentKind::UmExpand, {});
  double affine = check_value(rep_round, "um.affine_exact");
  double band = check_value(rep_def, "um.leading_coeff");
  return {9, "kernel_density_expansion", rep_round.pass && rep_def.pass, band,
          0.02, "<=",
          strf("round: 2pi u_m = m+1 with rel spread %.3g (<=1e-9, 50 pts); "
               "deformed(0.1): fitted leading coeff within %.3g of 1",
               affine, band),
          t.seconds()};
}

CriterionResult criterion_pullback_band(Ctx& ctx) {
  Timer t;
  std::vector<int> ladder{8, 16, 32};
  auto rep_round = ctx.run(ctx.round.model(), ctx.round,
                           asym::ExperimentKind::FsPullback, {}, ladder);
  auto rep_def = ctx.run(ctx.deformed.model(), ctx.deformed,
                         asym::ExperimentKind::FsPullback, {}, ladder);
  double flat = check_value(rep_round, "fs.flat_correction");
  double band = check_value(rep_def, "fs.uniform_band");
  bool positive = check_pass(rep_def, "fs.positive");
  bool pass = rep_round.pass && rep_def.pass;
  return {10, "pullback_correction_band", pass, band, 0.25, "<=",
          strf("round correction %.3g (<=1e-6); deformed(0.1) max-over-points "
               "varies by %.0f%% across m={8,16,32} (bound 25%%); density %s",
               flat, 100.0 * band, positive ? "positive" : "NOT positive"),
          t.seconds()};
}

CriterionResult criterion_trace_counting(Ctx& ctx) {
  Timer t;
  auto rep1 =
      ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Trace, {"1"});
  auto rep2 = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Trace,
                      {"x3sq"});
  double worst = check_value(rep1, "trace.counting_identity");
  double bound = check_value(rep2, "trace.bounded");
  return {11, "trace_counting", rep1.pass && rep2.pass, worst, 1e-10, "<=",
          strf("tr T_1 - (m/2pi)vol = 1 to %.3g on every rung; "
               "|trace gap| for x3sq %.3g (<=1.0)", worst, bound),
          t.seconds()};
}

CriterionResult criterion_spectral_measure(Ctx& ctx) {
  Timer t;
  auto rep = ctx.run(ctx.round.model(), ctx.round, asym::ExperimentKind::Spectral,
                     {"x3"}, {8, 12, 16, 24, 32});
  double top = check_value(rep, "spectral.at_top");
  return {12, "spectral_measure", rep.pass, top, 0.05, "<=",
          strf("x3 eigenvalue distribution vs pushforward for g=l^2: "
               "|gap|=%.3g at m=32, decreasing along the ladder %s",
               top, check_pass(rep, "spectral.decreasing") ? "(ok)" : "(FAIL)"),
          t.seconds()};
}

CriterionResult criterion_adjoint(Ctx& ctx) {
  Timer t;
  const KahlerModel& model = ctx.round.model();
  Observable f = geom::obs_add(
      geom::find_observable(model, "x1"),
      geom::obs_scale(cdouble(0.0, 1.0), geom::find_observable(model, "x2")));
  Observable fbar = geom::obs_conj(f);
  double worst = 0;
  for (int m : {8, 16, 32}) {
    const auto& lvl = ctx.round.level(m);
    auto tf = operators::toeplitz(lvl, f);
    auto tfb = operators::toeplitz(lvl, fbar);
    double scale = numerics::spectral_norm(tf.matrix);
    double defect = numerics::spectral_norm(tf.matrix.adjoint() - tfb.matrix);
    worst = std::max(worst, defect / scale);
  }
  return {13, "adjoint_consistency", worst <= 1e-10, worst, 1e-10, "<=",
          strf("|T_f^* - T_fbar| <= %.3g * |T_f| for f = x1 + i x2, "
               "m in {8,16,32}", worst),
          t.seconds()};
}

CriterionResult criterion_torus_structure(Ctx& ctx) {
  Timer t;
  const KahlerModel& model = ctx.torus.model();
  std::vector<int> ladder = asym::default_ladder(model);
  ctx.torus.prebuild(ladder, ctx.jobs);

  bool dims_ok = true;
  double gram_off = 0;
  for (int m : ladder) {
    const auto& lvl = ctx.torus.level(m);
    dims_ok = dims_ok && lvl.dim() == m;
    const auto& g = lvl.gram();
    for (int j = 0; j < g.rows(); ++j)
      for (int k = 0; k < g.cols(); ++k)
        if (j != k) gram_off = std::max(gram_off, std::abs(g.at(j, k)));
  }

  // T for the lowest lattice mode populates exactly one wrapped diagonal
  Observable f10 = geom::find_observable(model, "f_1_0");
  double shift_defect = 0;
  for (int m : {8, 16, 32}) {
    const auto& lvl = ctx.torus.level(m);
    auto op = operators::toeplitz(lvl, f10);
    int offset = 0;
    double best = -1;
    for (int j = 0; j < m; ++j)
      if (std::abs(op.matrix.at(j, 0)) > best) {
        best = std::abs(op.matrix.at(j, 0));
        offset = j;
      }
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m; ++j)
        if (j != (k + offset) % m)
          shift_defect = std::max(shift_defect, std::abs(op.matrix.at(j, k)));
  }

  auto rep = ctx.run(model, ctx.torus, asym::ExperimentKind::Dirac,
                     {"re_f_1_0", "im_f_1_0"});
  double rate = rep.fits.empty() ? -999.0 : rep.fits.back().rate;
  bool structure = dims_ok && gram_off <= 1e-10 && shift_defect <= 1e-10;
  return {14, "torus_structure", structure && rep.pass, rate, 0.9, ">=",
          strf("dim=m %s; gram offdiag %.3g (<=1e-10); single-shift defect "
               "%.3g (<=1e-10); (Re f10, Im f10) commutator defect rate %.3f "
               "(>=0.9)",
               dims_ok ? "ok" : "FAIL", gram_off, shift_defect, rate),
          t.seconds()};
}

CriterionResult criterion_gq_rate(Ctx& ctx) {
  Timer t;
  const KahlerModel& model = ctx.round.model();
  Observable x1 = geom::find_observable(model, "x1");
  std::vector<asym::Sample> samples;
  for (int m : asym::default_ladder(model)) {
    const auto& lvl = ctx.round.level(m);
    auto q = operators::tuynman_gq(lvl, x1);
    auto tp = operators::toeplitz(lvl, x1);
    samples.push_back({m, numerics::spectral_norm(q.matrix - tp.matrix)});
  }
  double rate = asym::decay_rate(samples);
  return {15, "gq_toeplitz_rate", rate >= 0.9, rate, 0.9, ">=",
          strf("|Q_f/i - T_f| for x1 decays with rate %.3f; "
               "defect %.3g at the top rung",
               rate, samples.back().value.real()),
          t.seconds()};
}

bool reports_identical(const asym::Report& a, const asym::Report& b) {
  if (a.ladder != b.ladder || a.pass != b.pass) return false;
  if (a.samples.size() != b.samples.size() || a.fits.size() != b.fits.size() ||
      a.checks.size() != b.checks.size() || a.levels.size() != b.levels.size())
    return false;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    const auto &x = a.samples[i], &y = b.samples[i];
    if (x.series != y.series || x.m != y.m || x.value != y.value) return false;
  }
  for (size_t i = 0; i < a.fits.size(); ++i) {
    const auto &x = a.fits[i], &y = b.fits[i];
    if (x.series != y.series || x.order != y.order || x.coeff_re != y.coeff_re ||
        x.coeff_im != y.coeff_im || x.residual != y.residual || x.rate != y.rate)
      return false;
  }
  for (size_t i = 0; i < a.checks.size(); ++i) {
    const auto &x = a.checks[i], &y = b.checks[i];
    if (x.name != y.name || x.value != y.value || x.threshold != y.threshold ||
        x.pass != y.pass)
      return false;
  }
  for (size_t i = 0; i < a.levels.size(); ++i) {
    const auto &x = a.levels[i], &y = b.levels[i];
    if (x.m != y.m || x.n_res != y.n_res || x.ortho_defect != y.ortho_defect ||
        x.resolution_drift != y.resolution_drift || x.retried != y.retried)
      return false;
  }
  return true;
}

CriterionResult criterion_wall_determinism(Ctx& ctx, double wall_so_far) {
  Timer t;
  asym::ExperimentSpec spec;
  spec.model = KahlerModel::round_sphere();
  spec.kind = asym::ExperimentKind::Norms;
  spec.observables = {"x3"};
  spec.ladder = {4, 6, 8, 12};
  auto rep1 = asym::run_experiment(spec, nullptr, ctx.jobs);
  auto rep2 = asym::run_experiment(spec, nullptr, 1);
  bool identical = reports_identical(rep1, rep2);
  double secs = t.seconds();
  double total = wall_so_far + secs;
  // headline value counts rerun mismatches so it stays deterministic; the
  // wall-clock reading lives in detail/seconds (the report's timing block)
  return {16, "suite_wall_determinism", identical && total < 900.0,
          identical ? 0.0 : 1.0, 0.0, "<=",
          strf("suite wall %.1fs (<900s); fresh-cache rerun of a probe "
               "experiment is %s in every numeric field",
               total, identical ? "bit-identical" : "NOT identical"),
          secs};
}

}  // namespace

AcceptanceReport run_acceptance(int jobs) {
  Ctx ctx;
  ctx.jobs = std::max(1, jobs);
  AcceptanceReport out;

  out.criteria.push_back(criterion_fuzzy_diagonal(ctx));
  out.criteria.push_back(criterion_norm_limit(ctx));
  out.criteria.push_back(criterion_bracket_rate(ctx));
  out.criteria.push_back(criterion_product_rate(ctx));
  out.criteria.push_back(criterion_berezin_closed(ctx));
  out.criteria.push_back(criterion_berezin_first_order(ctx));
  criteria_star(ctx, out);
  out.criteria.push_back(criterion_kernel_density(ctx));
  out.criteria.push_back(criterion_pullback_band(ctx));
  out.criteria.push_back(criterion_trace_counting(ctx));
  out.criteria.push_back(criterion_spectral_measure(ctx));
  out.criteria.push_back(criterion_adjoint(ctx));
  out.criteria.push_back(criterion_torus_structure(ctx));
  out.criteria.push_back(criterion_gq_rate(ctx));

  double wall = 0;
  for (const auto& c : out.criteria) wall += c.seconds;
  out.criteria.push_back(criterion_wall_determinism(ctx, wall));

  out.all_pass = true;
  out.wall_total = 0;
  for (const auto& c : out.criteria) {
    out.all_pass = out.all_pass && c.pass;
    out.wall_total += c.seconds;
  }
  return out;
}

std::string format_table(const AcceptanceReport& report) {
  std::string out;
  out += strf("%-4s %-26s %-6s %12s %3s %-9s %7s\n", "#", "criterion", "result",
              "value", "", "bound", "time");
  for (const auto& c : report.criteria) {
    out += strf("%-4d %-26s %-6s %12.4g %3s %-9.3g %6.1fs\n", c.id,
                c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value,
                c.relation.c_str(), c.threshold, c.seconds);
    out += strf("     %s\n", c.detail.c_str());
  }
  int passed = 0;
  for (const auto& c : report.criteria) passed += c.pass ? 1 : 0;
  out += strf("%d/%d criteria passed, %.1fs total\n", passed,
              static_cast<int>(report.criteria.size()), report.wall_total);
  return out;
}

}  // namespace btq::acceptance
