#pragma once

#include <functional>
#include <string>
#include <vector>

#include "btq/hilbert.hpp"

namespace btq::operators {

// Compression of multiplication by an observable to the level's section space.
// For geometric-quantization operators (tuynman_gq) the stored matrix is the
// Hermitian part and i_prefactor records the overall factor of i.
struct ToeplitzOp {
  const hilbert::QuantumLevel* level = nullptr;
  std::string source;
  numerics::ComplexMatrix matrix;
  double hermiticity_defect = 0.0;  // max |A - A*| before any symmetrization
  bool i_prefactor = false;
};

// matrix[j][k] = sum_i w_i f(pt_i) conj(U[i][j]) U[i][k]; real observables are
// symmetrized after the defect is recorded.
ToeplitzOp toeplitz(const hilbert::QuantumLevel& level, const geometry::Observable& f);

// Same compression for a symbol given by its values on the level's grid nodes.
ToeplitzOp toeplitz_from_samples(const hilbert::QuantumLevel& level,
                                 std::span<const cdouble> values, bool is_real,
                                 const std::string& source = "samples");

double op_norm(const ToeplitzOp& op);

// Grid sup of |f| with a local refinement pass.
double sup_norm(const hilbert::QuantumLevel& level, const geometry::Observable& f);

// || m i [T_f, T_g] - T_{{f,g}} ||
double dirac_defect(const hilbert::QuantumLevel& level, const geometry::Observable& f,
                    const geometry::Observable& g);

// || T_f T_g - T_{fg} ||
double product_defect(const hilbert::QuantumLevel& level, const geometry::Observable& f,
                      const geometry::Observable& g);

// i * T_{f - laplacian(f)/(2m)}; requires analytic second derivatives.
ToeplitzOp tuynman_gq(const hilbert::QuantumLevel& level, const geometry::Observable& f);

// Tr(T_f) - (m / total volume) * integral of f
double trace_gap(const hilbert::QuantumLevel& level, const geometry::Observable& f);

// | (1/m) sum_i g(lambda_i(T_f)) - (1/total volume) * integral of g(f) |
double spectral_measure_gap(const hilbert::QuantumLevel& level,
                            const geometry::Observable& f,
                            const std::function<double(double)>& g);

// Ascending eigenvalues of the Hermitian part of the matrix.
std::vector<double> hermitian_eigenvalues(const ToeplitzOp& op);

}  // namespace btq::operators
