#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "btq/hilbert.hpp"

namespace btq::coherent {

struct DegenerateFrame : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StencilOutOfDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluation functional at a point, represented by its orthonormal-basis
// coefficients; u is its squared norm (the on-diagonal kernel density).
struct CoherentVector {
  const hilbert::QuantumLevel* level = nullptr;
  geometry::ChartPoint pt;
  std::vector<cdouble> coeffs;
  double u = 0.0;
};

CoherentVector coherent_vector(const hilbert::QuantumLevel& level,
                               const geometry::ChartPoint& pt);

// u_m(x): sum_j |eta_j^ortho(x)|^2
double bergman_diag(const hilbert::QuantumLevel& level, const geometry::ChartPoint& pt);

// v_m(x,y): |sum_j eta_j(x) conj(eta_j(y))|^2
double bergman_two_point(const hilbert::QuantumLevel& level,
                         const geometry::ChartPoint& x, const geometry::ChartPoint& y);

// (c* A c) / (c* c) with c the coherent coefficients at pt
cdouble covariant_symbol(const hilbert::QuantumLevel& level,
                         const numerics::ComplexMatrix& a,
                         const geometry::ChartPoint& pt);

enum class BerezinRoute { Symbolic, Integral };

// Smooths f through the level: Symbolic evaluates the covariant symbol of the
// compression of f; Integral evaluates the kernel quadrature
// (1/u(x)) * sum_i w_i v(x, pt_i) f(pt_i). The two routes must agree.
std::vector<cdouble> berezin_transform(const hilbert::QuantumLevel& level,
                                       const geometry::Observable& f,
                                       std::span<const geometry::ChartPoint> pts,
                                       BerezinRoute route);

// m * g(pt) + d_z d_zbar log u_m(pt), the pullback density of the projective
// embedding metric; the derivative uses 5-point stencils of half-width 1e-3.
double fs_pullback_density(const hilbert::QuantumLevel& level,
                           const geometry::ChartPoint& pt);

}  // namespace btq::coherent
