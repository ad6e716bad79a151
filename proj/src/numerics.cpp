#include "btq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace btq::numerics {

NotPositiveDefinite::NotPositiveDefinite(int k)
    : std::runtime_error("matrix not positive definite at pivot " + std::to_string(k)),
      pivot(k) {}

NoConvergence::NoConvergence(const std::string& what) : std::runtime_error(what) {}

ComplexMatrix::ComplexMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}

ComplexMatrix ComplexMatrix::identity(int n) {
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix m(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m.at(j, i) = std::conj(at(i, j));
  return m;
}

ComplexMatrix ComplexMatrix::operator*(const ComplexMatrix& rhs) const {
  ComplexMatrix out(rows_, rhs.cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = 0; k < cols_; ++k) {
      cdouble aik = at(i, k);
      if (aik == cdouble(0, 0)) continue;
      const cdouble* brow = &rhs.a_[static_cast<size_t>(k) * rhs.cols_];
      cdouble* orow = &out.a_[static_cast<size_t>(i) * rhs.cols_];
      for (int j = 0; j < rhs.cols_; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

ComplexMatrix ComplexMatrix::operator+(const ComplexMatrix& rhs) const {
  ComplexMatrix out(rows_, cols_);
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] = a_[i] + rhs.a_[i];
  return out;
}

ComplexMatrix ComplexMatrix::operator-(const ComplexMatrix& rhs) const {
  ComplexMatrix out(rows_, cols_);
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] = a_[i] - rhs.a_[i];
  return out;
}

ComplexMatrix ComplexMatrix::scaled(cdouble s) const {
  ComplexMatrix out(rows_, cols_);
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] = s * a_[i];
  return out;
}

cdouble ComplexMatrix::trace() const {
  cdouble t = 0;
  for (int i = 0; i < std::min(rows_, cols_); ++i) t += at(i, i);
  return t;
}

double ComplexMatrix::max_abs() const {
  double m = 0;
  for (const auto& v : a_) m = std::max(m, std::abs(v));
  return m;
}

double ComplexMatrix::hermitian_defect() const {
  double d = 0;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      d = std::max(d, std::abs(at(i, j) - std::conj(at(j, i))));
  return d;
}

ComplexMatrix ComplexMatrix::hermitian_part() const {
  ComplexMatrix out(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      out.at(i, j) = 0.5 * (at(i, j) + std::conj(at(j, i)));
  return out;
}

void ComplexMatrix::set_hermitian_checked() {
  if (hermitian_defect() > 1e-12 * std::max(1.0, max_abs()))
    throw std::logic_error("hermitian flag rejected: defect too large");
  hermitian_ = true;
}

QuadratureRule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  QuadratureRule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.domain = QuadratureRule1D::Domain::Interval;
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-like initial guess for the i-th root (descending order)
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence: p2 walks up to P_n(x)
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) <= 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NoConvergence("gauss_legendre Newton iteration stalled");
    // one more recurrence pass at the converged node for the weight
    double p0 = 1.0, p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
    }
    pp = n * (x * p0 - p1) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule1D periodic_trapezoid(int n) {
  if (n < 1) throw std::invalid_argument("periodic_trapezoid: n must be positive");
  QuadratureRule1D rule;
  rule.nodes.resize(n);
  rule.weights.assign(n, 1.0 / n);
  for (int i = 0; i < n; ++i) rule.nodes[i] = static_cast<double>(i) / n;
  rule.domain = QuadratureRule1D::Domain::Periodic;
  return rule;
}

ComplexMatrix cholesky(const ComplexMatrix& g) {
  const int n = g.rows();
  ComplexMatrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = g.at(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(l.at(j, k));
    if (!(d > 0.0)) throw NotPositiveDefinite(j);
    double ljj = std::sqrt(d);
    l.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cdouble s = g.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * std::conj(l.at(j, k));
      l.at(i, j) = s / ljj;
    }
  }
  return l;
}

namespace {

double hypot2(double a, double b) { return std::hypot(a, b); }

// Householder reduction of Hermitian a to real tridiagonal (d, e), with the
// accumulated unitary (including the phase absorption of the off-diagonal)
// returned in q: a = q T q^H, T real symmetric tridiagonal.
void tridiagonalize(ComplexMatrix a, std::vector<double>& d, std::vector<double>& e,
                    ComplexMatrix& q) {
  const int n = a.rows();
  q = ComplexMatrix::identity(n);
  std::vector<cdouble> v(n), w(n);
  for (int k = 0; k + 2 < n; ++k) {
    double xnorm = 0;
    for (int i = k + 1; i < n; ++i) xnorm += std::norm(a.at(i, k));
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) continue;
    cdouble x0 = a.at(k + 1, k);
    cdouble phase = (x0 == cdouble(0, 0)) ? cdouble(1, 0) : x0 / std::abs(x0);
    cdouble beta = -phase * xnorm;
    // v = x - beta e1, normalized
    double vnorm2 = 0;
    for (int i = 0; i < n; ++i) v[i] = 0;
    for (int i = k + 1; i < n; ++i) v[i] = a.at(i, k);
    v[k + 1] -= beta;
    for (int i = k + 1; i < n; ++i) vnorm2 += std::norm(v[i]);
    if (vnorm2 == 0.0) continue;
    double inv = 1.0 / std::sqrt(vnorm2);
    for (int i = k + 1; i < n; ++i) v[i] *= inv;
    // a <- (I - 2 v v^H) a (I - 2 v v^H), using w = a v and c = v^H a v
    for (int i = 0; i < n; ++i) {
      cdouble s = 0;
      for (int j = k + 1; j < n; ++j) s += a.at(i, j) * v[j];
      w[i] = s;
    }
    cdouble c = 0;
    for (int i = k + 1; i < n; ++i) c += std::conj(v[i]) * w[i];
    for (int i = 0; i < n; ++i) {
      for (int j = k + 1; j < n; ++j) {
        a.at(i, j) += -2.0 * w[i] * std::conj(v[j]) - 2.0 * v[i] * std::conj(w[j]) +
                      4.0 * c * v[i] * std::conj(v[j]);
      }
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (j <= k) a.at(i, j) = std::conj(a.at(j, i));
    // q <- q (I - 2 v v^H)
    for (int i = 0; i < n; ++i) {
      cdouble s = 0;
      for (int j = k + 1; j < n; ++j) s += q.at(i, j) * v[j];
      for (int j = k + 1; j < n; ++j) q.at(i, j) -= 2.0 * s * std::conj(v[j]);
    }
  }
  d.resize(n);
  e.assign(n, 0.0);
  for (int i = 0; i < n; ++i) d[i] = a.at(i, i).real();
  // absorb off-diagonal phases into a diagonal unitary on q's columns
  cdouble s = 1.0;
  for (int i = 0; i + 1 < n; ++i) {
    cdouble off = a.at(i + 1, i);
    double mag = std::abs(off);
    e[i + 1] = mag;
    cdouble ph = (mag == 0.0) ? cdouble(1, 0) : off / mag;
    cdouble snext = s * ph;
    for (int r = 0; r < n; ++r) q.at(r, i + 1) *= snext;
    s = snext;
  }
}

// Implicit-shift QL on a real symmetric tridiagonal, rotations accumulated on
// the (complex) columns of z. Classic tql2 scheme; total sweep budget 100 n.
void tql2(std::vector<double>& d, std::vector<double>& e, ComplexMatrix& z) {
  const int n = static_cast<int>(d.size());
  if (n <= 1) return;
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  long budget = 100L * n;
  for (int l = 0; l < n; ++l) {
    for (;;) {
      int m = l;
      for (; m < n - 1; ++m) {
        double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
      }
      if (m == l) break;
      if (--budget < 0) throw NoConvergence("hermitian_eig QL sweep cap exceeded");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = hypot2(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (int i = m - 1; i >= l; --i) {
        double f = s * e[i];
        double b = c * e[i];
        r = hypot2(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (int k = 0; k < n; ++k) {
          cdouble zk1 = z.at(k, i + 1);
          cdouble zk0 = z.at(k, i);
          z.at(k, i + 1) = s * zk0 + c * zk1;
          z.at(k, i) = c * zk0 - s * zk1;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
}

}  // namespace

HermitianEigen hermitianEigenImpl(const ComplexMatrix& a) {
  const int n = a.rows();
  std::vector<double> d, e;
  ComplexMatrix q;
  tridiagonalize(a, d, e, q);
  tql2(d, e, q);
  // stable ascending sort of eigenpairs
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return d[i] < d[j]; });
  HermitianEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors = ComplexMatrix(n, n);
  for (int j = 0; j < n; ++j) {
    out.eigenvalues[j] = d[idx[j]];
    for (int i = 0; i < n; ++i) out.eigenvectors.at(i, j) = q.at(i, idx[j]);
  }
  return out;
}

HermitianEigen hermitian_eig(const ComplexMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("hermitian_eig: square input required");
  return hermitianEigenImpl(a);
}

double spectral_norm(const ComplexMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  if (a.max_abs() == 0.0) return 0.0;
  if (a.rows() == a.cols() &&
      a.hermitian_defect() <= 1e-12 * std::max(1.0, a.max_abs())) {
    auto e = hermitian_eig(a.hermitian_part());
    double m = 0;
    for (double lam : e.eigenvalues) m = std::max(m, std::abs(lam));
    return m;
  }
  ComplexMatrix b = (a.adjoint() * a).hermitian_part();
  auto e = hermitian_eig(b);
  double top = e.eigenvalues.empty() ? 0.0 : e.eigenvalues.back();
  return std::sqrt(std::max(0.0, top));
}

namespace {

template <typename T>
T tree_sum_impl(std::span<const T> xs) {
  const size_t n = xs.size();
  if (n == 0) return T{};
  if (n <= 8) {
    T s = xs[0];
    for (size_t i = 1; i < n; ++i) s += xs[i];
    return s;
  }
  const size_t half = n / 2;
  return tree_sum_impl(xs.first(half)) + tree_sum_impl(xs.subspan(half));
}

}  // namespace

double tree_sum(std::span<const double> xs) { return tree_sum_impl(xs); }
cdouble tree_sum(std::span<const cdouble> xs) { return tree_sum_impl(xs); }

}  // namespace btq::numerics
