#include "btq/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace btq::operators {

using geometry::Observable;
using hilbert::QuantumLevel;
using numerics::ComplexMatrix;

ToeplitzOp toeplitz_from_samples(const QuantumLevel& level,
                                 std::span<const cdouble> values, bool is_real,
                                 const std::string& source) {
  const auto& grid = level.grid();
  const auto& u = level.ortho_evals();
  const int npts = static_cast<int>(grid.points.size());
  const int dim = level.dim();
  if (static_cast<int>(values.size()) != npts)
    throw std::invalid_argument("toeplitz_from_samples: one value per grid node");

  ToeplitzOp op;
  op.level = &level;
  op.source = source;
  op.matrix = ComplexMatrix(dim, dim);

  for (int i = 0; i < npts; ++i) {
    cdouble wf = grid.weights[i] * values[i];
    const cdouble* row = &u.at(i, 0);
    for (int j = 0; j < dim; ++j) {
      cdouble c = wf * std::conj(row[j]);
      cdouble* out = &op.matrix.at(j, 0);
      for (int k = 0; k < dim; ++k) out[k] += c * row[k];
    }
  }

  op.hermiticity_defect = op.matrix.hermitian_defect();
  if (is_real) op.matrix = op.matrix.hermitian_part();
  return op;
}

ToeplitzOp toeplitz(const QuantumLevel& level, const Observable& f) {
  const auto& grid = level.grid();
  const int npts = static_cast<int>(grid.points.size());
  std::vector<cdouble> values(npts);
  for (int i = 0; i < npts; ++i) values[i] = f.value(grid.points[i]);
  ToeplitzOp op = toeplitz_from_samples(level, values, f.is_real, f.name);
  return op;
}

double op_norm(const ToeplitzOp& op) { return numerics::spectral_norm(op.matrix); }

double sup_norm(const QuantumLevel& level, const Observable& f) {
  return geometry::sup_abs(level.model(), level.grid(), f);
}

double dirac_defect(const QuantumLevel& level, const Observable& f,
                    const Observable& g) {
  auto tf = toeplitz(level, f);
  auto tg = toeplitz(level, g);
  auto bracket = geometry::poisson_bracket_observable(level.model(), f, g);
  auto tb = toeplitz(level, bracket);
  ComplexMatrix comm = tf.matrix * tg.matrix - tg.matrix * tf.matrix;
  ComplexMatrix d = comm.scaled(cdouble(0, level.m())) - tb.matrix;
  return numerics::spectral_norm(d);
}

double product_defect(const QuantumLevel& level, const Observable& f,
                      const Observable& g) {
  auto tf = toeplitz(level, f);
  auto tg = toeplitz(level, g);
  auto tfg = toeplitz(level, geometry::obs_mul(f, g));
  return numerics::spectral_norm(tf.matrix * tg.matrix - tfg.matrix);
}

ToeplitzOp tuynman_gq(const QuantumLevel& level, const Observable& f) {
  auto lap = geometry::laplacian_observable(level.model(), f);
  auto corrected =
      geometry::obs_add(f, geometry::obs_scale(-0.5 / level.m(), lap));
  corrected.is_real = f.is_real;
  ToeplitzOp op = toeplitz(level, corrected);
  op.source = f.name;
  op.i_prefactor = true;
  return op;
}

double trace_gap(const QuantumLevel& level, const Observable& f) {
  cdouble tr = toeplitz(level, f).matrix.trace();
  cdouble integral = geometry::integrate(level.grid(), f.value);
  double vol = level.model().total_volume();
  return tr.real() - level.m() / vol * integral.real();
}

double spectral_measure_gap(const QuantumLevel& level, const Observable& f,
                            const std::function<double(double)>& g) {
  auto eigs = hermitian_eigenvalues(toeplitz(level, f));
  std::vector<double> terms(eigs.size());
  for (size_t i = 0; i < eigs.size(); ++i) terms[i] = g(eigs[i]);
  double discrete = numerics::tree_sum(std::span<const double>(terms)) / level.m();
  cdouble integral = geometry::integrate(
      level.grid(),
      [&](const geometry::ChartPoint& pt) { return cdouble(g(f.value(pt).real()), 0); });
  double continuum = integral.real() / level.model().total_volume();
  return std::abs(discrete - continuum);
}

std::vector<double> hermitian_eigenvalues(const ToeplitzOp& op) {
  return numerics::hermitian_eig(op.matrix.hermitian_part()).eigenvalues;
}

}  // namespace btq::operators
