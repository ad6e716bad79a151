#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "btq/geometry.hpp"
#include "btq/numerics.hpp"

namespace btq::hilbert {

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gram matrix G[j][k] = sum_i w_i conj(E[i][j]) E[i][k] with deterministic
// tree-summed entries; E is node x dim.
numerics::ComplexMatrix gram_from_samples(const numerics::ComplexMatrix& evals,
                                          std::span<const double> weights);

// The level-m quantum space: quadrature grid, Gram matrix of the raw section
// basis, its Cholesky factor, and the orthonormalized basis sampled on-grid.
//
// If the first build is under-resolved (Cholesky breakdown or orthonormality
// defect above 1e-9) the grid resolution is doubled once; a second failure
// propagates.
class QuantumLevel {
 public:
  // n_res = 0 selects the model's default resolution policy.
  QuantumLevel(const geometry::KahlerModel& model, int m, int n_res = 0);

  const geometry::KahlerModel& model() const { return model_; }
  int m() const { return m_; }
  int dim() const { return dim_; }
  const geometry::QuadratureGrid& grid() const { return grid_; }

  const numerics::ComplexMatrix& gram() const { return gram_; }
  const numerics::ComplexMatrix& gram_cholesky() const { return chol_; }
  // ortho_evals()(i, j): value of the j-th orthonormal section at grid node i.
  const numerics::ComplexMatrix& ortho_evals() const { return ortho_; }

  // max |U* diag(w) U - I|
  double orthonormality_defect() const { return ortho_defect_; }
  // max relative Gram-entry change when the resolution is raised by 50%
  double resolution_drift() const { return resolution_drift_; }
  // true if the initial resolution failed and the build retried at double n_res
  bool retried() const { return retried_; }

  // Orthonormal basis values at an arbitrary chart point.
  std::vector<cdouble> ortho_basis_at(const geometry::ChartPoint& pt) const;

 private:
  bool try_build(int n_res);

  geometry::KahlerModel model_;
  int m_ = 0;
  int dim_ = 0;
  geometry::QuadratureGrid grid_;
  numerics::ComplexMatrix gram_, chol_, ortho_;
  double ortho_defect_ = 0.0;
  double resolution_drift_ = 0.0;
  bool retried_ = false;
};

// sum_j coeffs[j] * (j-th orthonormal section at pt)
cdouble section_eval(const QuantumLevel& level, std::span<const cdouble> coeffs,
                     const geometry::ChartPoint& pt);

}  // namespace btq::hilbert
