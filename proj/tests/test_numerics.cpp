#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "btq/numerics.hpp"
#include "test_util.hpp"

using namespace btq;
using namespace btq::numerics;
using btq::testutil::kahan_sum;

TEST_CASE("gauss_legendre small closed forms") {
  auto r1 = gauss_legendre(1);
  REQUIRE(r1.nodes.size() == 1);
  CHECK(std::abs(r1.nodes[0]) < 1e-15);
  CHECK(std::abs(r1.weights[0] - 2.0) < 1e-15);

  // n = 2: nodes +-1/sqrt(3), weights 1 (roots of P_2 = (3x^2 - 1)/2)
  auto r2 = gauss_legendre(2);
  double s3 = 1.0 / std::sqrt(3.0);
  CHECK(std::abs(r2.nodes[0] + s3) < 1e-15);
  CHECK(std::abs(r2.nodes[1] - s3) < 1e-15);
  CHECK(std::abs(r2.weights[0] - 1.0) < 1e-15);
  CHECK(std::abs(r2.weights[1] - 1.0) < 1e-15);
  CHECK(r2.domain == QuadratureRule1D::Domain::Interval);
}

TEST_CASE("gauss_legendre exactness and symmetry") {
  // degree-8 monomial with n = 5 (exact through degree 9): int x^8 = 2/9
  auto r5 = gauss_legendre(5);
  std::vector<double> terms;
  for (size_t i = 0; i < r5.nodes.size(); ++i)
    terms.push_back(r5.weights[i] * std::pow(r5.nodes[i], 8));
  CHECK(std::abs(tree_sum(terms) - 2.0 / 9.0) < 1e-15);

  auto r16 = gauss_legendre(16);
  std::vector<double> w30, odd, wsum;
  for (size_t i = 0; i < r16.nodes.size(); ++i) {
    w30.push_back(r16.weights[i] * std::pow(r16.nodes[i], 30));
    odd.push_back(r16.weights[i] * std::pow(r16.nodes[i], 7));
    wsum.push_back(r16.weights[i]);
  }
  CHECK(std::abs(tree_sum(w30) - 2.0 / 31.0) < 1e-14);
  CHECK(std::abs(tree_sum(odd)) < 1e-15);  // odd integrand, symmetric nodes
  CHECK(std::abs(tree_sum(wsum) - 2.0) < 1e-14);
  for (int i = 0; i < 16; ++i) {
    CHECK(r16.nodes[i] == -r16.nodes[15 - i]);
    CHECK(r16.weights[i] == r16.weights[15 - i]);
  }
  // nodes strictly increasing, interior
  for (int i = 1; i < 16; ++i) CHECK(r16.nodes[i] > r16.nodes[i - 1]);
  CHECK(r16.nodes.front() > -1.0);
  CHECK(r16.nodes.back() < 1.0);
}

TEST_CASE("periodic_trapezoid kills nonzero modes below aliasing") {
  auto r = periodic_trapezoid(7);
  REQUIRE(r.nodes.size() == 7);
  CHECK(r.domain == QuadratureRule1D::Domain::Periodic);
  for (int k = 1; k < 7; ++k) {
    std::vector<cdouble> terms;
    for (size_t i = 0; i < r.nodes.size(); ++i)
      terms.push_back(r.weights[i] *
                      std::exp(cdouble(0, 2 * std::numbers::pi * k * r.nodes[i])));
    CHECK(std::abs(tree_sum(terms)) < 1e-15);
  }
  std::vector<double> ones(r.weights.begin(), r.weights.end());
  CHECK(std::abs(tree_sum(ones) - 1.0) < 1e-15);
  // mode 7 aliases to the constant
  std::vector<cdouble> alias;
  for (size_t i = 0; i < r.nodes.size(); ++i)
    alias.push_back(r.weights[i] *
                    std::exp(cdouble(0, 2 * std::numbers::pi * 7 * r.nodes[i])));
  CHECK(std::abs(tree_sum(alias) - cdouble(1, 0)) < 1e-13);
}

TEST_CASE("cholesky closed forms") {
  // [[2,1],[1,2]] -> L = [[sqrt2, 0], [1/sqrt2, sqrt(3/2)]]
  ComplexMatrix g(2, 2);
  g.at(0, 0) = 2;
  g.at(0, 1) = 1;
  g.at(1, 0) = 1;
  g.at(1, 1) = 2;
  auto l = cholesky(g);
  CHECK(std::abs(l.at(0, 0) - cdouble(1.4142135623730951, 0)) < 1e-15);
  CHECK(std::abs(l.at(0, 1)) == 0.0);
  CHECK(std::abs(l.at(1, 0) - cdouble(0.7071067811865475, 0)) < 1e-15);
  CHECK(std::abs(l.at(1, 1) - cdouble(1.224744871391589, 0)) < 1e-15);

  // complex case [[2, i], [-i, 2]]
  ComplexMatrix h(2, 2);
  h.at(0, 0) = 2;
  h.at(0, 1) = cdouble(0, 1);
  h.at(1, 0) = cdouble(0, -1);
  h.at(1, 1) = 2;
  auto lh = cholesky(h);
  auto rec = lh * lh.adjoint();
  CHECK((rec - h).max_abs() < 1e-14);

  ComplexMatrix bad(2, 2);
  bad.at(0, 0) = 1;
  bad.at(1, 1) = -1;
  CHECK_THROWS_AS(cholesky(bad), NotPositiveDefinite);
  try {
    cholesky(bad);
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot == 1);
  }
}

TEST_CASE("hermitian_eig closed forms") {
  ComplexMatrix a(2, 2);
  a.at(0, 1) = 1;
  a.at(1, 0) = 1;
  auto e = hermitian_eig(a);
  REQUIRE(e.eigenvalues.size() == 2);
  CHECK(std::abs(e.eigenvalues[0] + 1.0) < 1e-14);
  CHECK(std::abs(e.eigenvalues[1] - 1.0) < 1e-14);

  // [[2, i], [-i, 2]] has eigenvalues 1 and 3
  ComplexMatrix b(2, 2);
  b.at(0, 0) = 2;
  b.at(0, 1) = cdouble(0, 1);
  b.at(1, 0) = cdouble(0, -1);
  b.at(1, 1) = 2;
  auto eb = hermitian_eig(b);
  CHECK(std::abs(eb.eigenvalues[0] - 1.0) < 1e-14);
  CHECK(std::abs(eb.eigenvalues[1] - 3.0) < 1e-14);
}

TEST_CASE("hermitian_eig random residual, unitarity, trace") {
  for (int n : {1, 2, 3, 17, 40}) {
    auto a = btq::testutil::random_hermitian(n);
    auto e = hermitian_eig(a);
    const auto& v = e.eigenvectors;
    // residual A V - V Lambda
    ComplexMatrix av = a * v;
    ComplexMatrix vl = v;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) vl.at(i, j) *= e.eigenvalues[j];
    CHECK((av - vl).max_abs() <= 1e-10 * std::max(1.0, a.max_abs()));
    CHECK((v.adjoint() * v - ComplexMatrix::identity(n)).max_abs() <= 1e-10);
    double trl = 0;
    for (double lam : e.eigenvalues) trl += lam;
    CHECK(std::abs(trl - a.trace().real()) <= 1e-10 * std::max(1.0, a.max_abs()) * n);
    for (int i = 1; i < n; ++i) CHECK(e.eigenvalues[i] >= e.eigenvalues[i - 1]);
  }
}

TEST_CASE("spectral_norm") {
  ComplexMatrix n1(1, 1);
  n1.at(0, 0) = -3;
  CHECK(std::abs(spectral_norm(n1) - 3.0) < 1e-14);

  // nilpotent [[0,2],[0,0]] has operator norm 2 (non-Hermitian branch)
  ComplexMatrix nil(2, 2);
  nil.at(0, 1) = 2;
  CHECK(std::abs(spectral_norm(nil) - 2.0) < 1e-12);

  ComplexMatrix h(2, 2);
  h.at(0, 0) = 1;
  h.at(0, 1) = 2;
  h.at(1, 0) = 2;
  h.at(1, 1) = 1;
  CHECK(std::abs(spectral_norm(h) - 3.0) < 1e-12);

  ComplexMatrix z(3, 3);
  CHECK(spectral_norm(z) == 0.0);
}

TEST_CASE("tree_sum against compensated reference") {
  std::vector<double> many(1000000, 1e-6);
  CHECK(std::abs(tree_sum(many) - 1.0) <= 1e-12);
  CHECK(std::abs(tree_sum(many) - kahan_sum(many)) <= 1e-12);

  std::vector<double> alt;
  for (int k = 0; k < 100000; ++k) alt.push_back((k % 2 ? -1.0 : 1.0) / (k + 1));
  CHECK(std::abs(tree_sum(alt) - kahan_sum(alt)) <= 1e-12);

  std::vector<double> empty;
  CHECK(tree_sum(empty) == 0.0);
  std::vector<cdouble> one{cdouble(2, -3)};
  CHECK(tree_sum(std::span<const cdouble>(one)) == cdouble(2, -3));
}

TEST_CASE("matrix helpers") {
  auto a = btq::testutil::random_hermitian(5);
  CHECK(a.hermitian_defect() < 1e-15);
  a.set_hermitian_checked();
  CHECK(a.hermitian());
  ComplexMatrix b(5, 5);
  b.at(0, 1) = cdouble(0, 1);  // not Hermitian
  CHECK(b.hermitian_defect() == 1.0);
  CHECK_THROWS(b.set_hermitian_checked());
  CHECK(b.hermitian_part().hermitian_defect() < 1e-16);
}
