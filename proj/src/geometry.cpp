#include "btq/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace btq::geometry {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sq_abs(cdouble z) { return std::norm(z); }

// d_z d_zbar of the pole-height function x3 = (t-1)/(t+1), t = |z|^2
double ddzbar_x3(double t) { return 2.0 * (1.0 - t) / std::pow(1.0 + t, 3); }

std::string int_name(int v) {
  return v < 0 ? "m" + std::to_string(-v) : std::to_string(v);
}

}  // namespace

KahlerModel KahlerModel::round_sphere() {
  return KahlerModel(ModelKind::RoundSphere, 0.0, cdouble(0, 0));
}

KahlerModel KahlerModel::deformed_sphere(double eps) {
  if (!(std::abs(eps) <= 0.3))
    throw ParameterOutOfRange("deformed_sphere: |eps| must be <= 0.3");
  return KahlerModel(ModelKind::DeformedSphere, eps, cdouble(0, 0));
}

KahlerModel KahlerModel::torus(cdouble tau) {
  if (!(tau.imag() >= 0.2))
    throw ParameterOutOfRange("torus: Im tau must be >= 0.2");
  return KahlerModel(ModelKind::Torus, 0.0, tau);
}

std::string KahlerModel::name() const {
  switch (kind_) {
    case ModelKind::RoundSphere:
      return "round_sphere";
    case ModelKind::DeformedSphere:
      return "deformed_sphere(" + std::to_string(eps_) + ")";
    case ModelKind::Torus:
      return "torus(" + std::to_string(tau_.real()) + "+" + std::to_string(tau_.imag()) +
             "i)";
  }
  return "?";
}

ChartPoint KahlerModel::canonical(const ChartPoint& pt) const {
  if (kind_ == ModelKind::Torus) {
    if (pt.chart != ChartId::TorusFundamental)
      throw PointNotInChart("torus model expects torus chart points");
    return pt;
  }
  if (pt.chart == ChartId::SphereSouth) return pt;
  if (pt.chart == ChartId::SphereNorth) {
    if (pt.z == cdouble(0, 0))
      throw PointNotInChart("north origin is not representable on the south chart");
    return {ChartId::SphereSouth, 1.0 / pt.z};
  }
  throw PointNotInChart("sphere model expects sphere chart points");
}

double KahlerModel::potential(const ChartPoint& raw) const {
  ChartPoint pt = canonical(raw);
  if (kind_ == ModelKind::Torus) {
    double y = pt.z.imag();
    return kTwoPi * y * y / tau_.imag();
  }
  double t = sq_abs(pt.z);
  double phi = std::log1p(t);
  if (kind_ == ModelKind::DeformedSphere) phi += eps_ * (t - 1.0) / (t + 1.0);
  return phi;
}

double KahlerModel::metric_density(const ChartPoint& raw) const {
  ChartPoint pt = canonical(raw);
  if (kind_ == ModelKind::Torus) return kPi / tau_.imag();
  double t = sq_abs(pt.z);
  double g = 1.0 / ((1.0 + t) * (1.0 + t));
  if (kind_ == ModelKind::DeformedSphere) g += eps_ * ddzbar_x3(t);
  return g;
}

int KahlerModel::sections_dim(int m) const {
  return kind_ == ModelKind::Torus ? m : m + 1;
}

int default_n_res(const KahlerModel& model, int m) {
  if (model.kind() == ModelKind::Torus) return std::max(24, 4 * m);
  return std::max(24, 2 * m + 16);
}

QuadratureGrid quadrature_grid(const KahlerModel& model, int n_res) {
  if (n_res < 2) throw ParameterOutOfRange("quadrature_grid: n_res too small");
  QuadratureGrid grid;
  grid.n_res = n_res;
  if (model.kind() == ModelKind::Torus) {
    auto rule = numerics::periodic_trapezoid(n_res);
    cdouble tau = model.tau();
    grid.points.reserve(static_cast<size_t>(n_res) * n_res);
    grid.weights.reserve(static_cast<size_t>(n_res) * n_res);
    double w = kTwoPi / (static_cast<double>(n_res) * n_res);
    for (double a : rule.nodes)
      for (double b : rule.nodes) {
        grid.points.push_back({ChartId::TorusFundamental, cdouble(a, 0) + b * tau});
        grid.weights.push_back(w);
      }
    return grid;
  }
  // Sphere: u-substitution u = (|z|^2-1)/(|z|^2+1) turns the round area form
  // into du dtheta / 2 exactly; the deformed model rescales by g_model/g_round.
  auto radial = numerics::gauss_legendre(n_res);
  auto angular = numerics::periodic_trapezoid(2 * n_res);
  grid.points.reserve(static_cast<size_t>(n_res) * 2 * n_res);
  grid.weights.reserve(grid.points.capacity());
  for (int i = 0; i < n_res; ++i) {
    double u = radial.nodes[i];
    double r = std::sqrt((1.0 + u) / (1.0 - u));
    double t = r * r;
    double ratio = 1.0;
    if (model.kind() == ModelKind::DeformedSphere) {
      double ground = 1.0 / ((1.0 + t) * (1.0 + t));
      ratio = (ground + model.epsilon() * ddzbar_x3(t)) / ground;
    }
    double wu = 0.5 * radial.weights[i] * ratio;
    for (size_t j = 0; j < angular.nodes.size(); ++j) {
      double theta = kTwoPi * angular.nodes[j];
      grid.points.push_back({ChartId::SphereSouth, std::polar(r, theta)});
      grid.weights.push_back(wu * kTwoPi * angular.weights[j]);
    }
  }
  return grid;
}

cdouble basis_eval(const KahlerModel& model, int m, int k, const ChartPoint& raw) {
  ChartPoint pt = model.canonical(raw);
  if (model.kind() == ModelKind::Torus) {
    if (k < 0 || k >= m) throw ParameterOutOfRange("basis_eval: k out of range");
    const cdouble tau = model.tau();
    const double beta = tau.imag();
    const double b = pt.z.imag() / beta;
    const double phi_half = 0.5 * m * model.potential(pt);
    const int ncut =
        static_cast<int>(std::ceil(std::sqrt(40.0 / (kPi * m * beta)))) + 2;
    // window centered on the dominant lattice index so the relative tail stays
    // below 1e-16 even at lifted evaluation points
    const long n0 = std::lround(-b - static_cast<double>(k) / m);
    cdouble acc = 0;
    for (long n = n0 - ncut; n <= n0 + ncut; ++n) {
      double q = static_cast<double>(n) + static_cast<double>(k) / m;
      cdouble expo = cdouble(0, kPi) * tau * (m * q * q) +
                     cdouble(0, kTwoPi * m * q) * pt.z - phi_half;
      acc += std::exp(expo);
    }
    return acc;
  }
  if (k < 0 || k > m) throw ParameterOutOfRange("basis_eval: k out of range");
  double r = std::abs(pt.z);
  if (r == 0.0)
    return k == 0 ? std::exp(-0.5 * m * model.potential(pt)) : cdouble(0, 0);
  double logmag = k * std::log(r) - 0.5 * m * model.potential(pt);
  return std::polar(std::exp(logmag), k * std::arg(pt.z));
}

// ---- observables -----------------------------------------------------------

Observable obs_const(cdouble c) {
  Observable o;
  o.name = "const";
  o.is_real = c.imag() == 0.0;
  o.value = [c](const ChartPoint&) { return c; };
  o.dz = [](const ChartPoint&) { return cdouble(0, 0); };
  o.dzbar = o.dz;
  o.dzdzbar = o.dz;
  return o;
}

Observable obs_add(const Observable& f, const Observable& g) {
  Observable o;
  o.name = f.name + "+" + g.name;
  o.is_real = f.is_real && g.is_real;
  auto fv = f.value, gv = g.value;
  o.value = [fv, gv](const ChartPoint& p) { return fv(p) + gv(p); };
  if (f.has_derivatives() && g.has_derivatives()) {
    auto pair = [](auto a, auto b) {
      return [a, b](const ChartPoint& p) { return a(p) + b(p); };
    };
    o.dz = pair(f.dz, g.dz);
    o.dzbar = pair(f.dzbar, g.dzbar);
    o.dzdzbar = pair(f.dzdzbar, g.dzdzbar);
  }
  return o;
}

Observable obs_scale(cdouble s, const Observable& f) {
  Observable o;
  o.name = "scale(" + f.name + ")";
  o.is_real = f.is_real && s.imag() == 0.0;
  auto fv = f.value;
  o.value = [s, fv](const ChartPoint& p) { return s * fv(p); };
  if (f.has_derivatives()) {
    auto mul = [s](auto a) {
      return [s, a](const ChartPoint& p) { return s * a(p); };
    };
    o.dz = mul(f.dz);
    o.dzbar = mul(f.dzbar);
    o.dzdzbar = mul(f.dzdzbar);
  }
  return o;
}

Observable obs_mul(const Observable& f, const Observable& g) {
  Observable o;
  o.name = f.name + "*" + g.name;
  o.is_real = f.is_real && g.is_real;
  auto fv = f.value, gv = g.value;
  o.value = [fv, gv](const ChartPoint& p) { return fv(p) * gv(p); };
  if (f.has_derivatives() && g.has_derivatives()) {
    auto fdz = f.dz, fdzb = f.dzbar, fdd = f.dzdzbar;
    auto gdz = g.dz, gdzb = g.dzbar, gdd = g.dzdzbar;
    o.dz = [fv, gv, fdz, gdz](const ChartPoint& p) {
      return fdz(p) * gv(p) + fv(p) * gdz(p);
    };
    o.dzbar = [fv, gv, fdzb, gdzb](const ChartPoint& p) {
      return fdzb(p) * gv(p) + fv(p) * gdzb(p);
    };
    o.dzdzbar = [fv, gv, fdz, gdz, fdzb, gdzb, fdd, gdd](const ChartPoint& p) {
      return fdd(p) * gv(p) + fdz(p) * gdzb(p) + fdzb(p) * gdz(p) + fv(p) * gdd(p);
    };
  }
  return o;
}

Observable obs_conj(const Observable& f) {
  Observable o;
  o.name = "conj(" + f.name + ")";
  o.is_real = f.is_real;
  auto fv = f.value;
  o.value = [fv](const ChartPoint& p) { return std::conj(fv(p)); };
  if (f.has_derivatives()) {
    auto fdz = f.dz, fdzb = f.dzbar, fdd = f.dzdzbar;
    o.dz = [fdzb](const ChartPoint& p) { return std::conj(fdzb(p)); };
    o.dzbar = [fdz](const ChartPoint& p) { return std::conj(fdz(p)); };
    o.dzdzbar = [fdd](const ChartPoint& p) { return std::conj(fdd(p)); };
  }
  return o;
}

namespace {

// The three euclidean coordinates as south-chart functions; valid for every
// sphere model (only the metric changes under deformation, not the chart).
Observable coord_observable(const KahlerModel& model, int axis) {
  Observable o;
  o.name = "x" + std::to_string(axis);
  o.is_real = true;
  auto canon = [model](const ChartPoint& p) { return model.canonical(p); };
  o.value = [canon, axis](const ChartPoint& raw) -> cdouble {
    cdouble z = canon(raw).z;
    double t = std::norm(z);
    switch (axis) {
      case 1:
        return 2.0 * z.real() / (1.0 + t);
      case 2:
        return 2.0 * z.imag() / (1.0 + t);
      default:
        return (t - 1.0) / (t + 1.0);
    }
  };
  o.dz = [canon, axis](const ChartPoint& raw) -> cdouble {
    cdouble z = canon(raw).z, zb = std::conj(z);
    double t = std::norm(z);
    double d2 = (1.0 + t) * (1.0 + t);
    switch (axis) {
      case 1:
        return (1.0 - zb * zb) / d2;
      case 2:
        return cdouble(0, -1) * (1.0 + zb * zb) / d2;
      default:
        return 2.0 * zb / d2;
    }
  };
  o.dzbar = [canon, axis](const ChartPoint& raw) -> cdouble {
    cdouble z = canon(raw).z;
    double t = std::norm(z);
    double d2 = (1.0 + t) * (1.0 + t);
    switch (axis) {
      case 1:
        return (1.0 - z * z) / d2;
      case 2:
        return cdouble(0, 1) * (1.0 + z * z) / d2;
      default:
        return 2.0 * z / d2;
    }
  };
  auto val = o.value;
  o.dzdzbar = [canon, val](const ChartPoint& raw) -> cdouble {
    // all three coordinates satisfy d_z d_zbar x = -2 x / (1+t)^2
    cdouble z = canon(raw).z;
    double t = std::norm(z);
    return -2.0 * val(raw) / ((1.0 + t) * (1.0 + t));
  };
  return o;
}

Observable torus_mode(const KahlerModel& model, int p, int q) {
  Observable o;
  o.name = "f_" + int_name(p) + "_" + int_name(q);
  o.is_real = (p == 0 && q == 0);
  cdouble tau = model.tau();
  cdouble denom = tau - std::conj(tau);
  cdouble adz = cdouble(0, kTwoPi) * (cdouble(q, 0) - cdouble(p, 0) * std::conj(tau)) / denom;
  cdouble adzbar = cdouble(0, kTwoPi) * (cdouble(p, 0) * tau - cdouble(q, 0)) / denom;
  double beta = tau.imag(), alpha = tau.real();
  auto phase = [p, q, beta, alpha](const ChartPoint& pt) {
    double b = pt.z.imag() / beta;
    double a = pt.z.real() - b * alpha;
    return std::exp(cdouble(0, kTwoPi * (p * a + q * b)));
  };
  o.value = phase;
  o.dz = [phase, adz](const ChartPoint& pt) { return adz * phase(pt); };
  o.dzbar = [phase, adzbar](const ChartPoint& pt) { return adzbar * phase(pt); };
  o.dzdzbar = [phase, adz, adzbar](const ChartPoint& pt) {
    return adz * adzbar * phase(pt);
  };
  return o;
}

Observable named(Observable o, std::string name) {
  o.name = std::move(name);
  return o;
}

Observable real_part(const Observable& f, std::string name) {
  Observable o = obs_scale(0.5, obs_add(f, obs_conj(f)));
  o.name = std::move(name);
  o.is_real = true;
  return o;
}

Observable imag_part(const Observable& f, std::string name) {
  Observable o = obs_scale(cdouble(0, -0.5), obs_add(f, obs_scale(-1.0, obs_conj(f))));
  o.name = std::move(name);
  o.is_real = true;
  return o;
}

std::vector<Observable> sphere_catalog(const KahlerModel& model) {
  std::vector<Observable> out;
  Observable one = named(obs_const(1.0), "1");
  Observable x1 = coord_observable(model, 1);
  Observable x2 = coord_observable(model, 2);
  Observable x3 = coord_observable(model, 3);
  auto mul = [](const Observable& a, const Observable& b, const char* n) {
    return named(obs_mul(a, b), n);
  };
  Observable x1x1 = obs_mul(x1, x1);
  Observable x2x2 = obs_mul(x2, x2);
  Observable x3x3 = named(obs_mul(x3, x3), "x3sq");
  out.push_back(one);
  out.push_back(x1);
  out.push_back(x2);
  out.push_back(x3);
  out.push_back(x3x3);
  // real harmonics, degree 2
  out.push_back(named(obs_add(obs_scale(1.5, x3x3), obs_const(-0.5)), "y2_z2"));
  out.push_back(mul(x1, x3, "y2_xz"));
  out.push_back(mul(x2, x3, "y2_yz"));
  out.push_back(mul(x1, x2, "y2_xy"));
  Observable x2y2 = obs_add(x1x1, obs_scale(-1.0, x2x2));
  out.push_back(named(x2y2, "y2_x2y2"));
  // degree 3
  Observable z2 = x3x3;
  out.push_back(named(obs_add(obs_scale(2.5, obs_mul(x3, z2)), obs_scale(-1.5, x3)),
                      "y3_z3"));
  Observable fivez2m1 = obs_add(obs_scale(5.0, z2), obs_const(-1.0));
  out.push_back(named(obs_mul(x1, fivez2m1), "y3_xz2"));
  out.push_back(named(obs_mul(x2, fivez2m1), "y3_yz2"));
  out.push_back(named(obs_mul(x3, x2y2), "y3_zx2y2"));
  out.push_back(named(obs_mul(x1, obs_mul(x2, x3)), "y3_xyz"));
  Observable x2m3y2 = obs_add(x1x1, obs_scale(-3.0, x2x2));
  Observable threex2my2 = obs_add(obs_scale(3.0, x1x1), obs_scale(-1.0, x2x2));
  out.push_back(named(obs_mul(x1, x2m3y2), "y3_x3"));
  out.push_back(named(obs_mul(x2, threex2my2), "y3_y3"));
  // degree 4
  Observable z4 = obs_mul(z2, z2);
  out.push_back(named(obs_add(obs_add(obs_scale(35.0 / 8, z4), obs_scale(-30.0 / 8, z2)),
                              obs_const(3.0 / 8)),
                      "y4_z4"));
  Observable sevenz2m3 = obs_add(obs_scale(7.0, z2), obs_const(-3.0));
  Observable sevenz2m1 = obs_add(obs_scale(7.0, z2), obs_const(-1.0));
  out.push_back(named(obs_mul(obs_mul(x1, x3), sevenz2m3), "y4_xz3"));
  out.push_back(named(obs_mul(obs_mul(x2, x3), sevenz2m3), "y4_yz3"));
  out.push_back(named(obs_mul(x2y2, sevenz2m1), "y4_x2y2z2"));
  out.push_back(named(obs_mul(obs_mul(x1, x2), sevenz2m1), "y4_xyz2"));
  out.push_back(named(obs_mul(obs_mul(x1, x3), x2m3y2), "y4_x3z"));
  out.push_back(named(obs_mul(obs_mul(x2, x3), threex2my2), "y4_y3z"));
  Observable x4 =
      obs_add(obs_add(obs_mul(x1x1, x1x1), obs_scale(-6.0, obs_mul(x1x1, x2x2))),
              obs_mul(x2x2, x2x2));
  out.push_back(named(x4, "y4_x4"));
  out.push_back(named(obs_mul(obs_mul(x1, x2), x2y2), "y4_xy_x2y2"));
  return out;
}

std::vector<Observable> torus_catalog(const KahlerModel& model) {
  std::vector<Observable> out;
  out.push_back(named(obs_const(1.0), "1"));
  for (int p = -3; p <= 3; ++p)
    for (int q = -3; q <= 3; ++q) {
      if (p == 0 && q == 0) continue;
      out.push_back(torus_mode(model, p, q));
    }
  out.push_back(real_part(torus_mode(model, 1, 0), "re_f_1_0"));
  out.push_back(imag_part(torus_mode(model, 1, 0), "im_f_1_0"));
  out.push_back(real_part(torus_mode(model, 0, 1), "re_f_0_1"));
  out.push_back(imag_part(torus_mode(model, 0, 1), "im_f_0_1"));
  return out;
}

}  // namespace

std::vector<Observable> builtin_observables(const KahlerModel& model) {
  return model.kind() == ModelKind::Torus ? torus_catalog(model) : sphere_catalog(model);
}

Observable find_observable(const KahlerModel& model, const std::string& name) {
  for (auto& o : builtin_observables(model))
    if (o.name == name) return o;
  throw UnknownObservable("unknown observable: " + name);
}

cdouble poisson_bracket(const KahlerModel& model, const Observable& f,
                        const Observable& g, const ChartPoint& pt) {
  if (!f.has_derivatives() || !g.has_derivatives())
    throw std::invalid_argument("poisson_bracket: analytic derivatives required");
  double gm = model.metric_density(pt);
  return cdouble(0, 1) / gm * (f.dzbar(pt) * g.dz(pt) - f.dz(pt) * g.dzbar(pt));
}

Observable poisson_bracket_observable(const KahlerModel& model, const Observable& f,
                                      const Observable& g) {
  if (!f.has_derivatives() || !g.has_derivatives())
    throw std::invalid_argument("poisson_bracket: analytic derivatives required");
  Observable o;
  o.name = "{" + f.name + "," + g.name + "}";
  o.is_real = f.is_real && g.is_real;
  auto fdz = f.dz, fdzb = f.dzbar, gdz = g.dz, gdzb = g.dzbar;
  o.value = [model, fdz, fdzb, gdz, gdzb](const ChartPoint& pt) {
    double gm = model.metric_density(pt);
    return cdouble(0, 1) / gm * (fdzb(pt) * gdz(pt) - fdz(pt) * gdzb(pt));
  };
  return o;
}

cdouble laplacian(const KahlerModel& model, const Observable& f, const ChartPoint& pt) {
  if (!f.has_derivatives())
    throw std::invalid_argument("laplacian: analytic derivatives required");
  return f.dzdzbar(pt) / model.metric_density(pt);
}

Observable laplacian_observable(const KahlerModel& model, const Observable& f) {
  if (!f.has_derivatives())
    throw std::invalid_argument("laplacian: analytic derivatives required");
  Observable o;
  o.name = "lap(" + f.name + ")";
  o.is_real = f.is_real;
  auto fdd = f.dzdzbar;
  o.value = [model, fdd](const ChartPoint& pt) {
    return fdd(pt) / model.metric_density(pt);
  };
  return o;
}

cdouble integrate(const QuadratureGrid& grid,
                  const std::function<cdouble(const ChartPoint&)>& f) {
  std::vector<cdouble> terms(grid.points.size());
  for (size_t i = 0; i < grid.points.size(); ++i)
    terms[i] = grid.weights[i] * f(grid.points[i]);
  return numerics::tree_sum(std::span<const cdouble>(terms));
}

namespace {

struct ParamPoint {
  double s, t;  // (u, theta) or (a, b)
};

ChartPoint from_param(const KahlerModel& model, ParamPoint p) {
  if (model.kind() == ModelKind::Torus) {
    double a = p.s - std::floor(p.s);
    double b = p.t - std::floor(p.t);
    return {ChartId::TorusFundamental, cdouble(a, 0) + b * model.tau()};
  }
  double u = std::clamp(p.s, -1.0 + 1e-12, 1.0 - 1e-12);
  double r = std::sqrt((1.0 + u) / (1.0 - u));
  return {ChartId::SphereSouth, std::polar(r, p.t)};
}

ParamPoint to_param(const KahlerModel& model, const ChartPoint& pt) {
  if (model.kind() == ModelKind::Torus) {
    double beta = model.tau().imag(), alpha = model.tau().real();
    double b = pt.z.imag() / beta;
    double a = pt.z.real() - b * alpha;
    return {a, b};
  }
  double t = std::norm(pt.z);
  return {(t - 1.0) / (t + 1.0), std::arg(pt.z)};
}

}  // namespace

double sup_abs(const KahlerModel& model, const QuadratureGrid& grid, const Observable& f) {
  double best = -1.0;
  ParamPoint where{0, 0};
  for (const auto& pt : grid.points) {
    double v = std::abs(f.value(pt));
    if (v > best) {
      best = v;
      where = to_param(model, pt);
    }
  }
  double hs, ht;
  if (model.kind() == ModelKind::Torus) {
    hs = ht = 1.0 / grid.n_res;
  } else {
    hs = 2.0 / grid.n_res;
    ht = kPi / grid.n_res;
  }
  for (int iter = 0; iter < 70; ++iter) {
    ParamPoint center = where;
    for (int ds = -1; ds <= 1; ++ds)
      for (int dt = -1; dt <= 1; ++dt) {
        if (ds == 0 && dt == 0) continue;
        ParamPoint cand{center.s + ds * hs, center.t + dt * ht};
        if (model.kind() != ModelKind::Torus) cand.s = std::clamp(cand.s, -1.0, 1.0);
        double v = std::abs(f.value(from_param(model, cand)));
        if (v > best) {
          best = v;
          where = cand;
        }
      }
    hs *= 0.45;
    ht *= 0.45;
  }
  return best;
}

std::vector<ChartPoint> test_points(const KahlerModel& model, int n) {
  std::vector<ChartPoint> out;
  out.reserve(n);
  const double golden = 0.6180339887498949;
  if (model.kind() == ModelKind::Torus) {
    for (int j = 0; j < n; ++j) {
      double a = std::fmod(0.173 + (j + 1) * golden, 1.0);
      double b = std::fmod(0.377 + (j + 1) * golden * golden, 1.0);
      out.push_back({ChartId::TorusFundamental, cdouble(a, 0) + b * model.tau()});
    }
    return out;
  }
  for (int j = 0; j < n; ++j) {
    double u = -0.92 + 1.84 * std::fmod(0.21 + (j + 1) * golden, 1.0);
    double theta = 2.399963229728653 * (j + 1);
    double r = std::sqrt((1.0 + u) / (1.0 - u));
    out.push_back({ChartId::SphereSouth, std::polar(r, theta)});
  }
  return out;
}

}  // namespace btq::geometry
