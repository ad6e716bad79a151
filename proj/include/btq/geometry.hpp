#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "btq/numerics.hpp"

namespace btq::geometry {

enum class ChartId { SphereSouth, SphereNorth, TorusFundamental };

// A point in one coordinate chart. For the sphere models the south chart
// covers everything but one pole; |z| > 1 points are equally representable on
// the north chart via z -> 1/z. Torus points are z = a + b*tau with the chart
// accepting arbitrary lifts of the fundamental domain.
struct ChartPoint {
  ChartId chart = ChartId::SphereSouth;
  cdouble z{};
};

inline ChartPoint sphere_point(cdouble z) { return {ChartId::SphereSouth, z}; }
inline ChartPoint north_point(cdouble w) { return {ChartId::SphereNorth, w}; }

enum class ModelKind { RoundSphere, DeformedSphere, Torus };

struct ParameterOutOfRange : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct PointNotInChart : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownObservable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Immutable description of one of the three surfaces. All carry total area
// 2*pi. The level-m sections are weighted by e^{-m * potential} in the
// canonical frame, and metric_density is d_z d_zbar of the potential.
class KahlerModel {
 public:
  static KahlerModel round_sphere();
  static KahlerModel deformed_sphere(double eps);  // requires |eps| <= 0.3
  static KahlerModel torus(cdouble tau);           // requires Im tau >= 0.2

  ModelKind kind() const { return kind_; }
  double epsilon() const { return eps_; }
  cdouble tau() const { return tau_; }
  std::string name() const;

  double potential(const ChartPoint& pt) const;
  double metric_density(const ChartPoint& pt) const;
  int sections_dim(int m) const;  // m+1 on the spheres, m on the torus
  double total_volume() const { return 6.283185307179586476925287; }

  // Maps a point to this model's canonical chart (south chart / fundamental
  // lift), throwing PointNotInChart on chart/model mismatch or the north
  // origin, which the south chart cannot represent.
  ChartPoint canonical(const ChartPoint& pt) const;

 private:
  KahlerModel(ModelKind k, double eps, cdouble tau) : kind_(k), eps_(eps), tau_(tau) {}
  ModelKind kind_;
  double eps_;
  cdouble tau_;
};

// Scalar observable with optional analytic chart derivatives. Derived
// observables (products of brackets, fitted coefficient fields, ...) may carry
// values only; has_derivatives() gates the operations that need more.
struct Observable {
  std::string name;
  bool is_real = true;
  std::function<cdouble(const ChartPoint&)> value;
  std::function<cdouble(const ChartPoint&)> dz;
  std::function<cdouble(const ChartPoint&)> dzbar;
  std::function<cdouble(const ChartPoint&)> dzdzbar;
  bool has_derivatives() const { return static_cast<bool>(dz); }
};

struct QuadratureGrid {
  std::vector<ChartPoint> points;
  std::vector<double> weights;  // include the full area element; sum = 2*pi
  int n_res = 0;
};

// Resolution policy: spheres use max(24, 2m+16) radial nodes, the torus
// max(24, 4m) per side (theta spectra widen like sqrt(m), so the policy stays
// comfortably past the aliasing threshold for every integrand used here).
int default_n_res(const KahlerModel& model, int m);

// Sphere: Gauss-Legendre in u = (|z|^2-1)/(|z|^2+1) on [-1,1] times uniform
// nodes in arg z (2*n_res of them), with the exact Jacobian folded into the
// weights. Torus: n_res x n_res uniform grid on (a,b) in [0,1)^2.
QuadratureGrid quadrature_grid(const KahlerModel& model, int n_res);

// Value of the k-th raw basis section at a point, in the unit frame:
// monomials z^k (spheres), theta-like lattice sums (torus), both times
// e^{-m*potential/2}. Safe in log-space for every m used here.
cdouble basis_eval(const KahlerModel& model, int m, int k, const ChartPoint& pt);

// {f,g} = (i/g) (dzbar f dz g - dz f dzbar g); requires analytic derivatives.
cdouble poisson_bracket(const KahlerModel& model, const Observable& f,
                        const Observable& g, const ChartPoint& pt);
Observable poisson_bracket_observable(const KahlerModel& model, const Observable& f,
                                      const Observable& g);

// Laplacian (1/g) d_z d_zbar f; on the round sphere this is the unit-sphere
// Laplace-Beltrami operator (x3 maps to -2 x3).
cdouble laplacian(const KahlerModel& model, const Observable& f, const ChartPoint& pt);
Observable laplacian_observable(const KahlerModel& model, const Observable& f);

std::vector<Observable> builtin_observables(const KahlerModel& model);
Observable find_observable(const KahlerModel& model, const std::string& name);

// Combinators; analytic derivatives propagate when both factors carry them.
Observable obs_const(cdouble c);
Observable obs_add(const Observable& f, const Observable& g);
Observable obs_scale(cdouble s, const Observable& f);
Observable obs_mul(const Observable& f, const Observable& g);
Observable obs_conj(const Observable& f);

// Quadrature sum of f over the grid (tree-summed, deterministic).
cdouble integrate(const QuadratureGrid& grid, const std::function<cdouble(const ChartPoint&)>& f);

// sup |f|: best grid node plus a shrinking 3x3 local subgrid search in the
// global (u, theta) / (a, b) parametrization.
double sup_abs(const KahlerModel& model, const QuadratureGrid& grid, const Observable& f);

// Deterministic, reasonably spread sample points for diagnostics and tests
// (interior of the charts, off the quadrature lattice).
std::vector<ChartPoint> test_points(const KahlerModel& model, int n);

}  // namespace btq::geometry
