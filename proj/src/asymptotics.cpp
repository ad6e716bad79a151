#include "btq/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "btq/coherent.hpp"
#include "btq/operators.hpp"

namespace btq::asymptotics {

using geometry::ChartPoint;
using geometry::KahlerModel;
using geometry::Observable;
using hilbert::QuantumLevel;
using numerics::ComplexMatrix;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Householder QR least squares for a small dense system; a is n x p row-major.
// Throws IllConditioned on a diagonal ratio above 1e12.
std::vector<double> qr_solve(std::vector<double> a, int n, int p,
                             std::vector<double> b) {
  for (int j = 0; j < p; ++j) {
    double norm = 0;
    for (int i = j; i < n; ++i) norm += a[i * p + j] * a[i * p + j];
    norm = std::sqrt(norm);
    if (a[j * p + j] > 0) norm = -norm;
    double vjj = a[j * p + j] - norm;
    std::vector<double> v(n - j, 0.0);
    v[0] = vjj;
    for (int i = j + 1; i < n; ++i) v[i - j] = a[i * p + j];
    double vv = 0;
    for (double x : v) vv += x * x;
    a[j * p + j] = norm;
    for (int i = j + 1; i < n; ++i) a[i * p + j] = 0;
    if (vv == 0) continue;
    for (int c = j + 1; c < p; ++c) {
      double dot = 0;
      for (int i = j; i < n; ++i) dot += v[i - j] * a[i * p + c];
      double f = 2.0 * dot / vv;
      for (int i = j; i < n; ++i) a[i * p + c] -= f * v[i - j];
    }
    double dot = 0;
    for (int i = j; i < n; ++i) dot += v[i - j] * b[i];
    double f = 2.0 * dot / vv;
    for (int i = j; i < n; ++i) b[i] -= f * v[i - j];
  }
  double dmax = 0, dmin = 1e300;
  for (int j = 0; j < p; ++j) {
    double d = std::abs(a[j * p + j]);
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  if (!(dmin > 0.0) || dmax / dmin > 1e12)
    throw IllConditioned("fit system condition estimate above 1e12; reduce order");
  std::vector<double> x(p);
  for (int j = p - 1; j >= 0; --j) {
    double s = b[j];
    for (int c = j + 1; c < p; ++c) s -= a[j * p + c] * x[c];
    x[j] = s / a[j * p + j];
  }
  return x;
}

void validate_samples(std::span<const Sample> samples, int min_len) {
  if (static_cast<int>(samples.size()) < min_len)
    throw std::invalid_argument("fit needs at least order+2 samples");
  for (size_t i = 1; i < samples.size(); ++i)
    if (samples[i].m <= samples[i - 1].m)
      throw std::invalid_argument("sample levels must be strictly increasing");
}

double decay_slope(std::span<const Sample> samples) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    double x = std::log(1.0 / s.m);
    double y = std::log(s.value.real());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

cdouble AsymptoticFit::eval(int m) const {
  cdouble acc = 0;
  double x = 1.0 / m, xp = 1.0;
  for (const auto& c : coeffs) {
    acc += c * xp;
    xp *= x;
  }
  return acc;
}

AsymptoticFit richardson_fit(std::span<const Sample> samples, int order) {
  if (order < 0) throw std::invalid_argument("fit order must be nonnegative");
  validate_samples(samples, order + 2);
  const int n = static_cast<int>(samples.size());
  const int p = order + 1;
  std::vector<double> a(static_cast<size_t>(n) * p);
  std::vector<double> bre(n), bim(n);
  for (int i = 0; i < n; ++i) {
    double x = 1.0 / samples[i].m, xp = 1.0;
    for (int j = 0; j < p; ++j) {
      a[i * p + j] = xp;
      xp *= x;
    }
    bre[i] = samples[i].value.real();
    bim[i] = samples[i].value.imag();
  }
  auto xre = qr_solve(a, n, p, bre);
  auto xim = qr_solve(a, n, p, bim);

  AsymptoticFit fit;
  fit.samples.assign(samples.begin(), samples.end());
  fit.order = order;
  fit.coeffs.resize(p);
  for (int j = 0; j < p; ++j) fit.coeffs[j] = cdouble(xre[j], xim[j]);
  for (const auto& s : samples)
    fit.residual = std::max(fit.residual, std::abs(fit.eval(s.m) - s.value));
  bool positive = true;
  for (const auto& s : samples)
    positive = positive && s.value.real() > 0 &&
               std::abs(s.value.imag()) <= 1e-12 * s.value.real();
  fit.rate = positive ? decay_slope(samples) : 0.0;
  return fit;
}

double decay_rate(std::span<const Sample> samples) {
  validate_samples(samples, 2);
  for (const auto& s : samples)
    if (!(s.value.real() > 0.0))
      throw NonPositiveSample("decay rate needs strictly positive samples");
  return decay_slope(samples);
}

// ---- level cache -----------------------------------------------------------

LevelCache::LevelCache(const KahlerModel& model, int n_res_override)
    : model_(model), n_res_(n_res_override) {}

const QuantumLevel& LevelCache::level(int m) {
  std::shared_future<std::shared_ptr<const QuantumLevel>> fut;
  std::promise<std::shared_ptr<const QuantumLevel>> promise;
  bool builder = false;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = built_.find(m);
    if (it == built_.end()) {
      fut = promise.get_future().share();
      built_.emplace(m, fut);
      builder = true;
    } else {
      fut = it->second;
    }
  }
  if (builder) {
    try {
      promise.set_value(std::make_shared<const QuantumLevel>(model_, m, n_res_));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return *fut.get();
}

void LevelCache::prebuild(std::span<const int> ms, int jobs) {
  if (jobs <= 1 || ms.size() <= 1) {
    for (int m : ms) level(m);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= ms.size()) return;
      try {
        level(ms[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  size_t nthreads = std::min<size_t>(jobs, ms.size());
  std::vector<std::thread> pool;
  for (size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---- star-product first coefficient ---------------------------------------

namespace {

// sigma(A)(pt) with the coherent coefficients taken from `vals` (the
// orthonormal basis values at pt): sum_jk vals_j A_jk conj(vals_k) / sum|vals|^2
cdouble symbol_from_vals(const ComplexMatrix& a, const std::vector<cdouble>& vals) {
  const int dim = a.rows();
  cdouble quad = 0;
  double u = 0;
  for (int j = 0; j < dim; ++j) {
    u += std::norm(vals[j]);
    cdouble vj = vals[j];
    for (int k = 0; k < dim; ++k) quad += vj * a.at(j, k) * std::conj(vals[k]);
  }
  return quad / u;
}

}  // namespace

C1Result extract_C1(LevelCache& cache, const Observable& f, const Observable& g,
                    std::span<const int> m_list, std::span<const ChartPoint> pts) {
  if (m_list.size() < 4)
    throw std::invalid_argument("first-coefficient extraction needs >= 4 levels");
  const int npts = static_cast<int>(pts.size());
  std::vector<std::vector<Sample>> dm(npts), pm(npts);

  for (int m : m_list) {
    const QuantumLevel& lvl = cache.level(m);
    auto tf = operators::toeplitz(lvl, f);
    auto tg = operators::toeplitz(lvl, g);
    auto tfg = operators::toeplitz(lvl, geometry::obs_mul(f, g));
    ComplexMatrix prod = tf.matrix * tg.matrix;
    ComplexMatrix d = (prod - tfg.matrix).scaled(static_cast<double>(m));
    for (int i = 0; i < npts; ++i) {
      auto vals = lvl.ortho_basis_at(pts[i]);
      dm[i].push_back({m, symbol_from_vals(d, vals)});
      pm[i].push_back({m, symbol_from_vals(prod, vals)});
    }
  }

  C1Result out;
  out.pts.assign(pts.begin(), pts.end());
  out.c1.resize(npts);
  out.residuals.resize(npts);
  double scale = 0.01;  // zeroth-order deviations measured against sup |f g|
  for (int i = 0; i < npts; ++i)
    scale = std::max(scale, std::abs(f.value(pts[i]) * g.value(pts[i])));
  for (int i = 0; i < npts; ++i) {
    auto fit = richardson_fit(dm[i], 2);
    out.c1[i] = fit.coeffs[0];
    out.residuals[i] = fit.residual;
    auto fit0 = richardson_fit(pm[i], 2);
    cdouble fg = f.value(pts[i]) * g.value(pts[i]);
    out.c0_worst_rel = std::max(out.c0_worst_rel, std::abs(fit0.coeffs[0] - fg) / scale);
  }
  return out;
}

// ---- experiments -----------------------------------------------------------

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Norms:
      return "norms";
    case ExperimentKind::Dirac:
      return "dirac";
    case ExperimentKind::Product:
      return "product";
    case ExperimentKind::Berezin:
      return "berezin";
    case ExperimentKind::Star:
      return "star";
    case ExperimentKind::Trace:
      return "trace";
    case ExperimentKind::Spectral:
      return "spectral";
    case ExperimentKind::UmExpand:
      return "umexpand";
    case ExperimentKind::FsPullback:
      return "fspullback";
  }
  return "?";
}

std::vector<int> default_ladder(const KahlerModel& model) {
  if (model.kind() == geometry::ModelKind::Torus) return {8, 12, 16, 24, 32};
  return {8, 12, 16, 24, 32, 48, 64};
}

namespace {

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

struct Runner {
  const ExperimentSpec& spec;
  LevelCache& cache;
  std::vector<int> ladder;
  Report rep;

  double threshold(const std::string& key, double fallback) const {
    auto it = spec.thresholds.find(key);
    return it == spec.thresholds.end() ? fallback : it->second;
  }

  void check(const std::string& name, double value, double thr,
             const std::string& relation) {
    bool pass = relation == "<="   ? value <= thr
                : relation == ">=" ? value >= thr
                                   : value == thr;
    rep.checks.push_back({name, value, thr, relation, pass});
    rep.pass = rep.pass && pass;
  }

  const Observable obs(size_t i) const {
    return geometry::find_observable(spec.model, spec.observables.at(i));
  }

  void add_fit(const std::string& series, const AsymptoticFit& fit) {
    FitRow row;
    row.series = series;
    row.order = fit.order;
    for (const auto& c : fit.coeffs) {
      row.coeff_re.push_back(c.real());
      row.coeff_im.push_back(c.imag());
    }
    row.residual = fit.residual;
    row.rate = fit.rate;
    rep.fits.push_back(row);
  }

  void add_rate_fit(const std::string& series, std::span<const Sample> samples) {
    FitRow row;
    row.series = series;
    row.order = 0;
    bool positive = true;
    for (const auto& s : samples) positive = positive && s.value.real() > 0;
    row.rate = positive ? decay_rate(samples) : -999.0;
    rep.fits.push_back(row);
  }

  double last_rate() const { return rep.fits.back().rate; }

  void run_norms();
  void run_defect_pair(bool with_bracket);
  void run_berezin();
  void run_star();
  void run_trace();
  void run_spectral();
  void run_umexpand();
  void run_fspullback();
};

void Runner::run_norms() {
  if (spec.observables.empty())
    throw std::invalid_argument("norms experiment needs at least one observable");
  const int fit_order = std::min<int>(3, static_cast<int>(ladder.size()) - 2);
  for (const auto& name : spec.observables) {
    Observable f = geometry::find_observable(spec.model, name);
    double sup = operators::sup_norm(cache.level(ladder.back()), f);
    std::vector<Sample> samples;
    double upper_excess = -1e300, lower_margin = 1e300;
    for (int m : ladder) {
      Timer t;
      double v = operators::op_norm(operators::toeplitz(cache.level(m), f));
      samples.push_back({m, v});
      rep.samples.push_back({"norm[" + name + "]", m, v});
      upper_excess = std::max(upper_excess, v - sup);
      lower_margin = std::min(lower_margin, v - (sup - 4.0 / m));
      rep.timing.emplace_back("norm[" + name + "]@" + std::to_string(m), t.seconds());
    }
    auto fit = richardson_fit(samples, fit_order);
    add_fit("norm[" + name + "]", fit);
    check("norms.c0_matches_sup[" + name + "]",
          std::abs(fit.coeffs[0].real() - sup), threshold("c0_tol", 1e-3), "<=");
    check("norms.upper[" + name + "]", upper_excess, threshold("upper_slack", 1e-9),
          "<=");
    check("norms.lower[" + name + "]", lower_margin, 0.0, ">=");
  }
}

void Runner::run_defect_pair(bool with_bracket) {
  if (spec.observables.size() != 2)
    throw std::invalid_argument("defect experiments need exactly two observables");
  Observable f = obs(0), g = obs(1);
  std::string series = std::string(with_bracket ? "dirac" : "product") + "[" +
                       f.name + "," + g.name + "]";
  std::vector<Sample> samples;
  for (int m : ladder) {
    Timer t;
    const QuantumLevel& lvl = cache.level(m);
    double v = with_bracket ? operators::dirac_defect(lvl, f, g)
                            : operators::product_defect(lvl, f, g);
    samples.push_back({m, v});
    rep.samples.push_back({series, m, v});
    rep.timing.emplace_back(series + "@" + std::to_string(m), t.seconds());
  }
  add_rate_fit(series, samples);
  const char* prefix = with_bracket ? "dirac" : "product";
  check(std::string(prefix) + ".rate", last_rate(), threshold("rate_min", 0.9), ">=");
  check(std::string(prefix) + ".shrinks",
        samples.back().value.real() - samples.front().value.real(), 0.0, "<=");
}

void Runner::run_berezin() {
  if (spec.observables.size() != 1)
    throw std::invalid_argument("berezin experiment needs exactly one observable");
  Observable f = obs(0);
  auto lap = geometry::laplacian_observable(spec.model, f);
  auto pts = geometry::test_points(spec.model, 12);
  const int npts = static_cast<int>(pts.size());
  std::vector<std::vector<Sample>> dm(npts);
  std::vector<cdouble> lap_vals(npts);
  double lap_sup = 0;
  for (int i = 0; i < npts; ++i) {
    lap_vals[i] = lap.value(pts[i]);
    lap_sup = std::max(lap_sup, std::abs(lap_vals[i]));
  }
  for (int m : ladder) {
    Timer t;
    const QuantumLevel& lvl = cache.level(m);
    auto transformed =
        coherent::berezin_transform(lvl, f, pts, coherent::BerezinRoute::Symbolic);
    double linf = 0;
    for (int i = 0; i < npts; ++i) {
      cdouble d = static_cast<double>(m) * (transformed[i] - f.value(pts[i]));
      dm[i].push_back({m, d});
      linf = std::max(linf, std::abs(d - lap_vals[i]));
    }
    rep.samples.push_back({"berezin_linf[" + f.name + "]", m, linf});
    rep.timing.emplace_back("berezin[" + f.name + "]@" + std::to_string(m),
                            t.seconds());
  }
  const int fit_order = std::min<int>(2, static_cast<int>(ladder.size()) - 2);
  double worst = 0;
  int worst_i = 0;
  std::vector<AsymptoticFit> fits(npts);
  for (int i = 0; i < npts; ++i) {
    fits[i] = richardson_fit(dm[i], fit_order);
    double dev = std::abs(fits[i].coeffs[0] - lap_vals[i]);
    if (dev > worst) {
      worst = dev;
      worst_i = i;
    }
  }
  add_fit("berezin_worst_point[" + f.name + "]", fits[worst_i]);
  check("berezin.first_order[" + f.name + "]", worst / std::max(lap_sup, 0.01),
        threshold("first_order_rel", 0.05), "<=");

  // route agreement diagnostic at the top of the ladder
  const QuantumLevel& top = cache.level(ladder.back());
  auto sym = coherent::berezin_transform(top, f, pts, coherent::BerezinRoute::Symbolic);
  auto integ =
      coherent::berezin_transform(top, f, pts, coherent::BerezinRoute::Integral);
  double gap = 0;
  for (int i = 0; i < npts; ++i) gap = std::max(gap, std::abs(sym[i] - integ[i]));
  check("berezin.routes_agree[" + f.name + "]", gap, threshold("routes_tol", 1e-8),
        "<=");
}

void Runner::run_star() {
  if (spec.observables.size() != 2)
    throw std::invalid_argument("star experiment needs exactly two observables");
  if (ladder.size() < 4)
    throw std::invalid_argument("star experiment needs a ladder of >= 4 levels");
  Observable f = obs(0), g = obs(1);

  // ten extraction points taken from the coarsest level's grid
  const auto& base_grid = cache.level(ladder.front()).grid();
  std::vector<ChartPoint> pts;
  size_t stride = std::max<size_t>(1, base_grid.points.size() / 10);
  for (size_t i = 0; i < base_grid.points.size() && pts.size() < 10; i += stride)
    pts.push_back(base_grid.points[i]);

  Timer t_extract;
  auto fg = extract_C1(cache, f, g, ladder, pts);
  auto gf = extract_C1(cache, g, f, ladder, pts);
  auto null = extract_C1(cache, geometry::find_observable(spec.model, "1"), g,
                         ladder, pts);
  rep.timing.emplace_back("star.extraction", t_extract.seconds());

  double anti_worst = 0, null_worst = 0, null_res = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    cdouble bracket = geometry::poisson_bracket(spec.model, f, g, pts[i]);
    cdouble anti = fg.c1[i] - gf.c1[i];
    cdouble want = cdouble(0, -1) * bracket;
    anti_worst =
        std::max(anti_worst, std::abs(anti - want) / (std::abs(bracket) + 0.01));
    null_worst = std::max(null_worst, std::abs(null.c1[i]));
    null_res = std::max(null_res, null.residuals[i]);
  }
  check("star.antisymmetry", anti_worst, threshold("antisymmetry_rel", 0.05), "<=");
  check("star.null_on_constants", null_worst, null_res + 1e-8, "<=");
  check("star.c0_identity", fg.c0_worst_rel, threshold("c0_rel", 0.01), "<=");

  // order-2 remainder: subtract the extracted first coefficient, interpolated
  // on each target grid, and require nearly quadratic decay of what is left
  Timer t_remainder;
  const int L = static_cast<int>(ladder.size());
  std::vector<ComplexMatrix> defects(L);
  std::vector<const QuantumLevel*> levels(L);
  for (int s = 0; s < L; ++s) {
    const QuantumLevel& lvl = cache.level(ladder[s]);
    levels[s] = &lvl;
    auto tf = operators::toeplitz(lvl, f);
    auto tg = operators::toeplitz(lvl, g);
    auto tfg = operators::toeplitz(lvl, geometry::obs_mul(f, g));
    defects[s] =
        (tf.matrix * tg.matrix - tfg.matrix).scaled(static_cast<double>(ladder[s]));
  }
  // weights w_s with c0 = sum_s w_s d_s for the order-2 least-squares fit
  std::vector<double> w(L);
  {
    double n00 = 0, n01 = 0, n02 = 0, n11 = 0, n12 = 0, n22 = 0;
    for (int s = 0; s < L; ++s) {
      double x = 1.0 / ladder[s];
      n00 += 1;
      n01 += x;
      n02 += x * x;
      n11 += x * x;
      n12 += x * x * x;
      n22 += x * x * x * x;
    }
    // first column of inverse(N) for N = [[n00,n01,n02],[n01,n11,n12],[n02,n12,n22]]
    double det = n00 * (n11 * n22 - n12 * n12) - n01 * (n01 * n22 - n12 * n02) +
                 n02 * (n01 * n12 - n11 * n02);
    double i00 = (n11 * n22 - n12 * n12) / det;
    double i10 = -(n01 * n22 - n02 * n12) / det;
    double i20 = (n01 * n12 - n02 * n11) / det;
    for (int s = 0; s < L; ++s) {
      double x = 1.0 / ladder[s];
      w[s] = i00 + i10 * x + i20 * x * x;
    }
  }
  std::vector<Sample> remainder;
  for (int t = 0; t + 1 < L; ++t) {
    const QuantumLevel& target = *levels[t];
    const auto& grid = target.grid();
    const int npts = static_cast<int>(grid.points.size());
    std::vector<cdouble> c1_grid(npts, 0.0);
    for (int s = 0; s < L; ++s) {
      for (int i = 0; i < npts; ++i) {
        // on the target's own level the stored values avoid re-evaluation
        cdouble sigma;
        if (s == t) {
          const auto& u = target.ortho_evals();
          std::vector<cdouble> vals(target.dim());
          for (int j = 0; j < target.dim(); ++j) vals[j] = u.at(i, j);
          sigma = symbol_from_vals(defects[s], vals);
        } else {
          sigma = symbol_from_vals(defects[s], levels[s]->ortho_basis_at(grid.points[i]));
        }
        c1_grid[i] += w[s] * sigma;
      }
    }
    auto tf = operators::toeplitz(target, f);
    auto tg = operators::toeplitz(target, g);
    auto tfg = operators::toeplitz(target, geometry::obs_mul(f, g));
    auto tc1 = operators::toeplitz_from_samples(target, c1_grid, false, "c1_hat");
    double r = numerics::spectral_norm(tf.matrix * tg.matrix - tfg.matrix -
                                       tc1.matrix.scaled(1.0 / ladder[t]));
    remainder.push_back({ladder[t], r});
    rep.samples.push_back({"star_remainder[" + f.name + "," + g.name + "]", ladder[t], r});
  }
  rep.timing.emplace_back("star.remainder", t_remainder.seconds());
  add_rate_fit("star_remainder[" + f.name + "," + g.name + "]", remainder);
  check("star.remainder_rate", last_rate(), threshold("remainder_rate_min", 1.8),
        ">=");
}

void Runner::run_trace() {
  if (spec.observables.size() != 1)
    throw std::invalid_argument("trace experiment needs exactly one observable");
  Observable f = obs(0);
  std::string series = "trace_gap[" + f.name + "]";
  std::vector<Sample> samples;
  for (int m : ladder) {
    Timer t;
    double v = operators::trace_gap(cache.level(m), f);
    samples.push_back({m, v});
    rep.samples.push_back({series, m, v});
    rep.timing.emplace_back(series + "@" + std::to_string(m), t.seconds());
  }
  if (f.name == "1") {
    // counting identity: gap = dim - m exactly
    double worst = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
      double want = spec.model.sections_dim(ladder[i]) - ladder[i];
      worst = std::max(worst, std::abs(samples[i].value.real() - want));
    }
    check("trace.counting_identity", worst, threshold("unit_tol", 1e-10), "<=");
  } else {
    double worst = 0;
    for (const auto& s : samples) worst = std::max(worst, std::abs(s.value.real()));
    check("trace.bounded", worst, threshold("gap_bound", 1.0), "<=");
  }
}

void Runner::run_spectral() {
  if (spec.observables.size() != 1)
    throw std::invalid_argument("spectral experiment needs exactly one observable");
  Observable f = obs(0);
  std::string series = "spectral_gap[" + f.name + "]";
  std::vector<Sample> samples;
  for (int m : ladder) {
    Timer t;
    double v = operators::spectral_measure_gap(cache.level(m), f,
                                               [](double l) { return l * l; });
    samples.push_back({m, v});
    rep.samples.push_back({series, m, v});
    rep.timing.emplace_back(series + "@" + std::to_string(m), t.seconds());
  }
  check("spectral.at_top", samples.back().value.real(),
        threshold("top_bound", 0.05), "<=");
  double worst_rise = -1e300;
  for (size_t i = 1; i < samples.size(); ++i)
    worst_rise = std::max(worst_rise,
                          samples[i].value.real() - samples[i - 1].value.real());
  check("spectral.decreasing", worst_rise, 0.0, "<=");
}

void Runner::run_umexpand() {
  auto pts = geometry::test_points(spec.model, 50);
  const int npts = static_cast<int>(pts.size());
  std::vector<std::vector<Sample>> per_pt(npts);
  double worst_affine = 0;
  for (int m : ladder) {
    Timer t;
    const QuantumLevel& lvl = cache.level(m);
    double lo = 1e300, hi = -1e300, mean = 0;
    for (int i = 0; i < npts; ++i) {
      double u = kTwoPi * coherent::bergman_diag(lvl, pts[i]);
      lo = std::min(lo, u);
      hi = std::max(hi, u);
      mean += u / npts;
      per_pt[i].push_back({m, u / m});
    }
    double spread = (hi - lo) / mean;
    rep.samples.push_back({"um_rel_spread", m, spread});
    rep.samples.push_back({"um_mean_over_dim", m, mean / lvl.dim()});
    worst_affine =
        std::max({worst_affine, spread, std::abs(mean / lvl.dim() - 1.0)});
    rep.timing.emplace_back("umexpand@" + std::to_string(m), t.seconds());
  }
  if (spec.model.kind() == geometry::ModelKind::DeformedSphere) {
    const int fit_order = std::min<int>(2, static_cast<int>(ladder.size()) - 2);
    double worst = 0;
    int worst_i = 0;
    std::vector<AsymptoticFit> fits(npts);
    for (int i = 0; i < npts; ++i) {
      fits[i] = richardson_fit(per_pt[i], fit_order);
      double dev = std::abs(fits[i].coeffs[0].real() - 1.0);
      if (dev > worst) {
        worst = dev;
        worst_i = i;
      }
    }
    add_fit("um_leading_worst_point", fits[worst_i]);
    check("um.leading_coeff", worst, threshold("c0_band", 0.02), "<=");
  } else {
    check("um.affine_exact", worst_affine, threshold("affine_tol", 1e-9), "<=");
  }
}

void Runner::run_fspullback() {
  auto pts = geometry::test_points(spec.model, 12);
  std::vector<double> corr;
  double min_density = 1e300;
  for (int m : ladder) {
    Timer t;
    const QuantumLevel& lvl = cache.level(m);
    double worst = 0;
    for (const auto& pt : pts) {
      double density = coherent::fs_pullback_density(lvl, pt);
      min_density = std::min(min_density, density);
      worst = std::max(worst,
                       std::abs(density - m * spec.model.metric_density(pt)));
    }
    corr.push_back(worst);
    rep.samples.push_back({"fs_correction", m, worst});
    rep.timing.emplace_back("fspullback@" + std::to_string(m), t.seconds());
  }
  if (spec.model.kind() == geometry::ModelKind::DeformedSphere) {
    double cmax = *std::max_element(corr.begin(), corr.end());
    double cmin = *std::min_element(corr.begin(), corr.end());
    check("fs.uniform_band", cmax / cmin - 1.0, threshold("band_rel", 0.25), "<=");
    check("fs.positive", min_density, 0.0, ">=");
  } else {
    double cmax = *std::max_element(corr.begin(), corr.end());
    check("fs.flat_correction", cmax, threshold("flat_tol", 1e-6), "<=");
  }
}

}  // namespace

Report run_experiment(const ExperimentSpec& spec, LevelCache* cache, int jobs) {
  LevelCache local(spec.model, spec.n_res);
  LevelCache& c = cache ? *cache : local;
  if (cache && cache->n_res_override() != spec.n_res)
    throw std::invalid_argument("shared cache resolution differs from spec");

  Runner runner{spec, c, {}, {}};
  runner.ladder = spec.ladder.empty() ? default_ladder(spec.model) : spec.ladder;
  for (size_t i = 1; i < runner.ladder.size(); ++i)
    if (runner.ladder[i] <= runner.ladder[i - 1])
      throw std::invalid_argument("ladder must be strictly increasing");
  switch (spec.kind) {  // argument-count validation before any level builds
    case ExperimentKind::Norms:
      if (spec.observables.empty())
        throw std::invalid_argument("norms experiment needs at least one observable");
      break;
    case ExperimentKind::Dirac:
    case ExperimentKind::Product:
    case ExperimentKind::Star:
      if (spec.observables.size() != 2)
        throw std::invalid_argument("experiment needs exactly two observables");
      break;
    case ExperimentKind::Berezin:
    case ExperimentKind::Trace:
    case ExperimentKind::Spectral:
      if (spec.observables.size() != 1)
        throw std::invalid_argument("experiment needs exactly one observable");
      break;
    default:
      break;
  }
  for (const auto& name : spec.observables)
    geometry::find_observable(spec.model, name);  // rejects unknown names early
  runner.rep.model = spec.model.name();
  runner.rep.kind = kind_name(spec.kind);
  runner.rep.observables = spec.observables;
  runner.rep.ladder = runner.ladder;

  Timer total;
  {
    Timer t;
    c.prebuild(runner.ladder, jobs);
    runner.rep.timing.emplace_back("prebuild", t.seconds());
  }
  switch (spec.kind) {
    case ExperimentKind::Norms:
      runner.run_norms();
      break;
    case ExperimentKind::Dirac:
      runner.run_defect_pair(true);
      break;
    case ExperimentKind::Product:
      runner.run_defect_pair(false);
      break;
    case ExperimentKind::Berezin:
      runner.run_berezin();
      break;
    case ExperimentKind::Star:
      runner.run_star();
      break;
    case ExperimentKind::Trace:
      runner.run_trace();
      break;
    case ExperimentKind::Spectral:
      runner.run_spectral();
      break;
    case ExperimentKind::UmExpand:
      runner.run_umexpand();
      break;
    case ExperimentKind::FsPullback:
      runner.run_fspullback();
      break;
  }
  for (int m : runner.ladder) {
    const QuantumLevel& lvl = c.level(m);
    runner.rep.levels.push_back({m, lvl.grid().n_res, lvl.orthonormality_defect(),
                                 lvl.resolution_drift(), lvl.retried()});
  }
  runner.rep.wall_total = total.seconds();
  return runner.rep;
}

}  // namespace btq::asymptotics
