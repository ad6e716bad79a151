#include "btq/hilbert.hpp"

#include <cmath>
#include <utility>

namespace btq::hilbert {

using numerics::ComplexMatrix;

ComplexMatrix gram_from_samples(const ComplexMatrix& evals,
                                std::span<const double> weights) {
  const int npts = evals.rows();
  const int dim = evals.cols();
  ComplexMatrix g(dim, dim);
  std::vector<cdouble> terms(npts);
  for (int j = 0; j < dim; ++j)
    for (int k = j; k < dim; ++k) {
      for (int i = 0; i < npts; ++i)
        terms[i] = weights[i] * std::conj(evals.at(i, j)) * evals.at(i, k);
      cdouble v = numerics::tree_sum(std::span<const cdouble>(terms));
      g.at(j, k) = v;
      if (k != j) g.at(k, j) = std::conj(v);
    }
  return g;
}

namespace {

// Solve row * L^H = rhs for a lower-triangular Cholesky factor L, in place.
void apply_inverse_adjoint(const ComplexMatrix& l, cdouble* row) {
  const int n = l.rows();
  for (int k = 0; k < n; ++k) {
    cdouble v = row[k];
    for (int j = 0; j < k; ++j) v -= row[j] * std::conj(l.at(k, j));
    row[k] = v / l.at(k, k).real();
  }
}

}  // namespace

QuantumLevel::QuantumLevel(const geometry::KahlerModel& model, int m, int n_res)
    : model_(model), m_(m) {
  if (m < 1) throw geometry::ParameterOutOfRange("QuantumLevel: m must be >= 1");
  dim_ = model_.sections_dim(m);
  int base = n_res > 0 ? n_res : geometry::default_n_res(model_, m);
  if (!try_build(base)) {
    retried_ = true;
    if (!try_build(2 * base))
      throw numerics::NoConvergence(
          "level build under-resolved after one resolution doubling");
  }
}

bool QuantumLevel::try_build(int n_res) {
  grid_ = geometry::quadrature_grid(model_, n_res);
  const int npts = static_cast<int>(grid_.points.size());
  ComplexMatrix evals(npts, dim_);
  for (int i = 0; i < npts; ++i)
    for (int k = 0; k < dim_; ++k)
      evals.at(i, k) = geometry::basis_eval(model_, m_, k, grid_.points[i]);

  gram_ = gram_from_samples(evals, grid_.weights);
  try {
    chol_ = numerics::cholesky(gram_);
  } catch (const numerics::NotPositiveDefinite&) {
    if (retried_) throw;
    return false;
  }

  for (int i = 0; i < npts; ++i) apply_inverse_adjoint(chol_, &evals.at(i, 0));

  // orthonormality defect: U* diag(w) U - I, streamed over nodes
  ComplexMatrix overlap(dim_, dim_);
  for (int i = 0; i < npts; ++i) {
    double w = grid_.weights[i];
    const cdouble* row = &evals.at(i, 0);
    for (int j = 0; j < dim_; ++j) {
      cdouble wc = w * std::conj(row[j]);
      for (int k = j; k < dim_; ++k) overlap.at(j, k) += wc * row[k];
    }
  }
  double defect = 0.0;
  for (int j = 0; j < dim_; ++j)
    for (int k = j; k < dim_; ++k) {
      cdouble want = j == k ? cdouble(1, 0) : cdouble(0, 0);
      defect = std::max(defect, std::abs(overlap.at(j, k) - want));
    }
  ortho_defect_ = defect;
  if (defect > 1e-9) {
    if (retried_)
      throw numerics::NoConvergence("orthonormality defect persists after retry");
    return false;
  }
  ortho_ = std::move(evals);

  // resolution audit: rebuild the Gram at 1.5x resolution, streamed
  auto audit_grid =
      geometry::quadrature_grid(model_, static_cast<int>(std::ceil(1.5 * n_res)));
  ComplexMatrix audit(dim_, dim_);
  std::vector<cdouble> row(dim_);
  for (size_t i = 0; i < audit_grid.points.size(); ++i) {
    for (int k = 0; k < dim_; ++k)
      row[k] = geometry::basis_eval(model_, m_, k, audit_grid.points[i]);
    double w = audit_grid.weights[i];
    for (int j = 0; j < dim_; ++j) {
      cdouble wc = w * std::conj(row[j]);
      for (int k = j; k < dim_; ++k) audit.at(j, k) += wc * row[k];
    }
  }
  double drift = 0.0;
  for (int j = 0; j < dim_; ++j)
    for (int k = j; k < dim_; ++k)
      drift = std::max(drift, std::abs(audit.at(j, k) - gram_.at(j, k)));
  resolution_drift_ = drift / std::max(1e-300, gram_.max_abs());
  return true;
}

std::vector<cdouble> QuantumLevel::ortho_basis_at(const geometry::ChartPoint& pt) const {
  std::vector<cdouble> vals(dim_);
  for (int k = 0; k < dim_; ++k) vals[k] = geometry::basis_eval(model_, m_, k, pt);
  apply_inverse_adjoint(chol_, vals.data());
  return vals;
}

cdouble section_eval(const QuantumLevel& level, std::span<const cdouble> coeffs,
                     const geometry::ChartPoint& pt) {
  if (static_cast<int>(coeffs.size()) != level.dim())
    throw DimensionMismatch("section_eval: coefficient length != dim");
  auto vals = level.ortho_basis_at(pt);
  cdouble acc = 0;
  for (int j = 0; j < level.dim(); ++j) acc += coeffs[j] * vals[j];
  return acc;
}

}  // namespace btq::hilbert
