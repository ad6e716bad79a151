#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace btq {

using cdouble = std::complex<double>;

namespace numerics {

// Thrown by cholesky when a pivot is not strictly positive; `pivot` is the
// zero-based index of the offending diagonal entry.
struct NotPositiveDefinite : std::runtime_error {
  int pivot;
  explicit NotPositiveDefinite(int k);
};

struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what);
};

// Dense row-major complex matrix. Small sizes only (operator dimension stays
// below ~200 here), so everything is plain O(n^3) loops with no blocking.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(int rows, int cols);
  static ComplexMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  cdouble& at(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  const cdouble& at(int i, int j) const {
    return a_[static_cast<size_t>(i) * cols_ + j];
  }
  std::span<const cdouble> data() const { return a_; }
  std::span<cdouble> data() { return a_; }

  ComplexMatrix adjoint() const;
  ComplexMatrix operator*(const ComplexMatrix& rhs) const;
  ComplexMatrix operator+(const ComplexMatrix& rhs) const;
  ComplexMatrix operator-(const ComplexMatrix& rhs) const;
  ComplexMatrix scaled(cdouble s) const;
  cdouble trace() const;
  double max_abs() const;
  // max_ij |a_ij - conj(a_ji)|
  double hermitian_defect() const;
  ComplexMatrix hermitian_part() const;  // (A + A^H)/2

  // Marks the matrix as Hermitian after validating the defect against
  // 1e-12 * max(1, max_abs()); throws std::logic_error on failure.
  void set_hermitian_checked();
  bool hermitian() const { return hermitian_; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<cdouble> a_;
  bool hermitian_ = false;
};

struct QuadratureRule1D {
  enum class Domain { Interval, Periodic };
  std::vector<double> nodes;
  std::vector<double> weights;
  Domain domain = Domain::Interval;
};

struct HermitianEigen {
  std::vector<double> eigenvalues;  // ascending
  ComplexMatrix eigenvectors;       // unitary, k-th column pairs with eigenvalues[k]
};

// Gauss-Legendre rule on [-1, 1]: nodes found by Newton iteration on P_n from
// Chebyshev-like initial guesses (tolerance 1e-15, 100 iteration cap), weights
// 2 / ((1 - x^2) P_n'(x)^2). Exact for polynomials of degree <= 2n - 1.
QuadratureRule1D gauss_legendre(int n);

// Uniform rule on the unit period [0, 1): nodes k/n, weights 1/n. Integrates
// e^{2 pi i k x} exactly to zero for 0 < |k| < n (spectral accuracy for smooth
// periodic integrands); callers rescale nodes/weights to their own period.
QuadratureRule1D periodic_trapezoid(int n);

// Lower-triangular L with G = L L^H for Hermitian positive definite G.
ComplexMatrix cholesky(const ComplexMatrix& g);

// Full eigensystem of a Hermitian matrix: Householder tridiagonalization
// followed by implicit-shift QL, total sweep cap 100 * n.
HermitianEigen hermitian_eig(const ComplexMatrix& a);

// Largest singular value: max |eigenvalue| when the input is Hermitian (defect
// <= 1e-12 * max(1, max_abs)), sqrt of the top eigenvalue of A^H A otherwise.
double spectral_norm(const ComplexMatrix& a);

// Balanced pairwise summation. The reduction tree depends only on the length,
// so results are reproducible regardless of thread scheduling at call sites.
double tree_sum(std::span<const double> xs);
cdouble tree_sum(std::span<const cdouble> xs);

}  // namespace numerics
}  // namespace btq
