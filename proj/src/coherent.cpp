#include "btq/coherent.hpp"

#include <cmath>

#include "btq/operators.hpp"

namespace btq::coherent {

using geometry::ChartPoint;
using geometry::Observable;
using hilbert::QuantumLevel;
using numerics::ComplexMatrix;

CoherentVector coherent_vector(const QuantumLevel& level, const ChartPoint& pt) {
  CoherentVector cv;
  cv.level = &level;
  cv.pt = pt;
  auto vals = level.ortho_basis_at(pt);
  cv.coeffs.resize(vals.size());
  double u = 0;
  for (size_t j = 0; j < vals.size(); ++j) {
    cv.coeffs[j] = std::conj(vals[j]);
    u += std::norm(vals[j]);
  }
  if (!(u >= 1e-280) || !std::isfinite(u))
    throw DegenerateFrame("coherent vector norm underflow at evaluation point");
  cv.u = u;
  return cv;
}

double bergman_diag(const QuantumLevel& level, const ChartPoint& pt) {
  auto vals = level.ortho_basis_at(pt);
  double u = 0;
  for (const auto& v : vals) u += std::norm(v);
  return u;
}

double bergman_two_point(const QuantumLevel& level, const ChartPoint& x,
                         const ChartPoint& y) {
  auto vx = level.ortho_basis_at(x);
  auto vy = level.ortho_basis_at(y);
  cdouble b = 0;
  for (size_t j = 0; j < vx.size(); ++j) b += vx[j] * std::conj(vy[j]);
  return std::norm(b);
}

cdouble covariant_symbol(const QuantumLevel& level, const ComplexMatrix& a,
                         const ChartPoint& pt) {
  if (a.rows() != level.dim() || a.cols() != level.dim())
    throw DimensionMismatch("covariant_symbol: matrix does not match level dim");
  auto cv = coherent_vector(level, pt);
  cdouble quad = 0;
  for (int j = 0; j < level.dim(); ++j) {
    cdouble cj = std::conj(cv.coeffs[j]);
    for (int k = 0; k < level.dim(); ++k) quad += cj * a.at(j, k) * cv.coeffs[k];
  }
  return quad / cv.u;
}

std::vector<cdouble> berezin_transform(const QuantumLevel& level, const Observable& f,
                                       std::span<const ChartPoint> pts,
                                       BerezinRoute route) {
  std::vector<cdouble> out(pts.size());
  if (route == BerezinRoute::Symbolic) {
    auto op = operators::toeplitz(level, f);
    for (size_t i = 0; i < pts.size(); ++i)
      out[i] = covariant_symbol(level, op.matrix, pts[i]);
    return out;
  }
  const auto& grid = level.grid();
  const auto& u = level.ortho_evals();
  const int npts = static_cast<int>(grid.points.size());
  const int dim = level.dim();
  std::vector<cdouble> fvals(npts);
  for (int i = 0; i < npts; ++i) fvals[i] = f.value(grid.points[i]);
  std::vector<cdouble> terms(npts);
  for (size_t p = 0; p < pts.size(); ++p) {
    auto vx = level.ortho_basis_at(pts[p]);
    double ux = 0;
    for (const auto& v : vx) ux += std::norm(v);
    if (!(ux >= 1e-280) || !std::isfinite(ux))
      throw DegenerateFrame("kernel route: norm underflow at evaluation point");
    for (int i = 0; i < npts; ++i) {
      cdouble b = 0;
      const cdouble* row = &u.at(i, 0);
      for (int j = 0; j < dim; ++j) b += vx[j] * std::conj(row[j]);
      terms[i] = grid.weights[i] * std::norm(b) * fvals[i];
    }
    out[p] = numerics::tree_sum(std::span<const cdouble>(terms)) / ux;
  }
  return out;
}

namespace {

// quarter-Laplacian of log u_m by 5-point stencils in each chart direction
double dd_log_kernel(const QuantumLevel& level, const ChartPoint& pt, double h) {
  auto logu = [&](double dx, double dy) {
    double u = bergman_diag(level, {pt.chart, pt.z + cdouble(dx, dy)});
    if (!(u > 0.0) || !std::isfinite(u))
      throw StencilOutOfDomain("kernel density not positive on stencil");
    return std::log(u);
  };
  auto second = [&](bool ydir) {
    auto at = [&](int s) { return ydir ? logu(0, s * h) : logu(s * h, 0); };
    return (-at(2) + 16 * at(1) - 30 * at(0) + 16 * at(-1) - at(-2)) / (12 * h * h);
  };
  return 0.25 * (second(false) + second(true));
}

// Sign of the derivative correction, fixed once by requiring positivity of the
// total density on a deformed model where the correction is nontrivial.
int correction_sign() {
  static const int sign = [] {
    QuantumLevel probe(geometry::KahlerModel::deformed_sphere(0.1), 16);
    for (int cand : {+1, -1}) {
      bool positive = true;
      for (const auto& pt : geometry::test_points(probe.model(), 12)) {
        double density = probe.m() * probe.model().metric_density(pt) +
                         cand * dd_log_kernel(probe, pt, 1e-3);
        if (!(density > 0)) {
          positive = false;
          break;
        }
      }
      if (positive) return cand;
    }
    return +1;
  }();
  return sign;
}

}  // namespace

double fs_pullback_density(const QuantumLevel& level, const ChartPoint& pt) {
  double correction = dd_log_kernel(level, pt, 1e-3);
  return level.m() * level.model().metric_density(pt) +
         correction_sign() * correction;
}

}  // namespace btq::coherent
