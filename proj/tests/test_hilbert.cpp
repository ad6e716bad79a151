#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "btq/hilbert.hpp"
#include "test_util.hpp"

using btq::cdouble;
using btq::testutil::close;
using btq::testutil::uniform;
using btq::geometry::ChartId;
using btq::geometry::ChartPoint;
using btq::geometry::KahlerModel;
using btq::hilbert::QuantumLevel;
using btq::numerics::ComplexMatrix;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// closed form for the round-sphere monomial norms:
// <z^k, z^k> = 2*pi * k! (m-k)! / (m+1)!
double sphere_gram_diag(int m, int k) {
  double v = kTwoPi;
  // k!(m-k)!/(m+1)! built as a product of ratios to stay in range
  for (int j = 1; j <= m + 1; ++j) {
    v /= j;
    if (j <= k) v *= j;
    if (j <= m - k) v *= j;
  }
  return v;
}
}  // namespace

TEST_CASE("dimensions and default resolutions") {
  QuantumLevel s(KahlerModel::round_sphere(), 3);
  CHECK(s.dim() == 4);
  CHECK(s.grid().n_res == 24);
  QuantumLevel s8(KahlerModel::round_sphere(), 8);
  CHECK(s8.dim() == 9);
  CHECK(s8.grid().n_res == 32);
  QuantumLevel t(KahlerModel::torus(cdouble(0, 1)), 3);
  CHECK(t.dim() == 3);
  CHECK(t.grid().n_res == 24);
  QuantumLevel t8(KahlerModel::torus(cdouble(0, 1)), 8);
  CHECK(t8.grid().n_res == 32);
}

TEST_CASE("sphere gram matches the beta closed form") {
  QuantumLevel lvl(KahlerModel::round_sphere(), 4);
  const auto& g = lvl.gram();
  CHECK(close(g.at(0, 0).real(), kTwoPi / 5.0, 1e-10));
  CHECK(close(g.at(1, 1).real(), std::numbers::pi / 10.0, 1e-10));
  CHECK(close(g.at(2, 2).real(), std::numbers::pi / 15.0, 1e-10));
  CHECK(close(g.at(3, 3).real(), std::numbers::pi / 10.0, 1e-10));
  CHECK(close(g.at(4, 4).real(), kTwoPi / 5.0, 1e-10));

  for (int m : {2, 4, 8, 16, 32}) {
    QuantumLevel l(KahlerModel::round_sphere(), m);
    double maxdiag = 0;
    for (int k = 0; k <= m; ++k) {
      double expect = sphere_gram_diag(m, k);
      CHECK(std::abs(l.gram().at(k, k).real() - expect) <= 1e-10 * expect);
      maxdiag = std::max(maxdiag, expect);
    }
    double off = 0;
    for (int j = 0; j <= m; ++j)
      for (int k = 0; k <= m; ++k)
        if (j != k) off = std::max(off, std::abs(l.gram().at(j, k)));
    CHECK(off <= 1e-12 * maxdiag);
  }
}

TEST_CASE("torus gram is a known multiple of the identity") {
  for (cdouble tau : {cdouble(0, 1), cdouble(0.25, 1.1)}) {
    for (int m : {3, 5, 8}) {
      QuantumLevel lvl(KahlerModel::torus(tau), m);
      double expect = kTwoPi / std::sqrt(2.0 * m * tau.imag());
      double off = 0;
      for (int j = 0; j < m; ++j) {
        CHECK(std::abs(lvl.gram().at(j, j).real() - expect) <= 1e-10 * expect);
        for (int k = 0; k < m; ++k)
          if (j != k) off = std::max(off, std::abs(lvl.gram().at(j, k)));
      }
      CHECK(off <= 1e-10 * expect);
    }
  }
}

TEST_CASE("orthonormality defect is tiny across models") {
  auto check_level = [](const KahlerModel& model, int m) {
    QuantumLevel lvl(model, m);
    CHECK(lvl.orthonormality_defect() <= 1e-10);
    CHECK(!lvl.retried());
  };
  check_level(KahlerModel::round_sphere(), 2);
  check_level(KahlerModel::round_sphere(), 8);
  check_level(KahlerModel::round_sphere(), 32);
  check_level(KahlerModel::deformed_sphere(0.1), 16);
  check_level(KahlerModel::deformed_sphere(-0.3), 8);
  check_level(KahlerModel::torus(cdouble(0, 1)), 3);
  check_level(KahlerModel::torus(cdouble(0, 1)), 16);
  check_level(KahlerModel::torus(cdouble(0.25, 1.1)), 8);
}

TEST_CASE("resolution audit reports negligible drift at default policy") {
  CHECK(QuantumLevel(KahlerModel::round_sphere(), 8).resolution_drift() <= 1e-9);
  CHECK(QuantumLevel(KahlerModel::deformed_sphere(0.3), 8).resolution_drift() <= 1e-9);
  CHECK(QuantumLevel(KahlerModel::torus(cdouble(0, 1)), 8).resolution_drift() <= 1e-9);
}

TEST_CASE("gram is invariant under per-node frame phases") {
  KahlerModel model = KahlerModel::round_sphere();
  QuantumLevel lvl(model, 5);
  const auto& grid = lvl.grid();
  int npts = static_cast<int>(grid.points.size());
  ComplexMatrix evals(npts, lvl.dim());
  for (int i = 0; i < npts; ++i)
    for (int k = 0; k < lvl.dim(); ++k)
      evals.at(i, k) = btq::geometry::basis_eval(model, 5, k, grid.points[i]);

  ComplexMatrix direct = btq::hilbert::gram_from_samples(evals, grid.weights);
  double scale = lvl.gram().max_abs();
  CHECK((direct + lvl.gram().scaled(-1.0)).max_abs() <= 1e-13 * scale);

  ComplexMatrix phased = evals;
  for (int i = 0; i < npts; ++i) {
    cdouble ph = std::polar(1.0, kTwoPi * std::fmod(0.37 * (i + 1) * 0.618033988749895, 1.0));
    for (int k = 0; k < lvl.dim(); ++k) phased.at(i, k) *= ph;
  }
  ComplexMatrix phased_gram = btq::hilbert::gram_from_samples(phased, grid.weights);
  CHECK((phased_gram + direct.scaled(-1.0)).max_abs() <= 1e-12 * scale);
}

TEST_CASE("parseval for random coefficient vectors") {
  for (int trial = 0; trial < 3; ++trial) {
    QuantumLevel lvl(KahlerModel::round_sphere(), 6);
    std::vector<cdouble> c(lvl.dim());
    double norm2 = 0;
    for (auto& v : c) {
      v = cdouble(uniform(-1, 1), uniform(-1, 1));
      norm2 += std::norm(v);
    }
    const auto& grid = lvl.grid();
    const auto& u = lvl.ortho_evals();
    double quad = 0;
    for (size_t i = 0; i < grid.points.size(); ++i) {
      cdouble s = 0;
      for (int j = 0; j < lvl.dim(); ++j) s += u.at(static_cast<int>(i), j) * c[j];
      quad += grid.weights[i] * std::norm(s);
    }
    CHECK(std::abs(quad - norm2) <= 1e-8 * norm2);
  }
}

TEST_CASE("section_eval agrees with stored on-grid values") {
  QuantumLevel lvl(KahlerModel::torus(cdouble(0, 1)), 5);
  std::vector<cdouble> e0(lvl.dim(), 0.0);
  e0[0] = 1.0;
  for (size_t i = 0; i < lvl.grid().points.size(); i += 37) {
    cdouble got = btq::hilbert::section_eval(lvl, e0, lvl.grid().points[i]);
    cdouble want = lvl.ortho_evals().at(static_cast<int>(i), 0);
    CHECK(std::abs(got - want) <= 1e-11 * std::max(1.0, std::abs(want)));
  }
  std::vector<cdouble> zero(lvl.dim(), 0.0);
  CHECK(std::abs(btq::hilbert::section_eval(lvl, zero, lvl.grid().points[0])) == 0.0);
  std::vector<cdouble> bad(lvl.dim() + 1, 0.0);
  CHECK_THROWS_AS(btq::hilbert::section_eval(lvl, bad, lvl.grid().points[0]),
                  btq::hilbert::DimensionMismatch);
}

TEST_CASE("off-grid evaluation matches an independent quadrature inner product") {
  // <eta_j^ortho, eta_k^ortho> over the grid must reproduce delta_jk when the
  // sections are evaluated through the off-grid path as well.
  QuantumLevel lvl(KahlerModel::round_sphere(), 4);
  const auto& grid = lvl.grid();
  for (int j = 0; j < lvl.dim(); ++j) {
    cdouble acc = 0;
    for (size_t i = 0; i < grid.points.size(); ++i) {
      auto vals = lvl.ortho_basis_at(grid.points[i]);
      acc += grid.weights[i] * vals[j] * std::conj(vals[j]);
    }
    CHECK(close(acc.real(), 1.0, 1e-9));
  }
}

TEST_CASE("under-resolved builds retry once then fail") {
  QuantumLevel lvl(KahlerModel::round_sphere(), 40, 4);
  CHECK(lvl.retried());
  CHECK(lvl.orthonormality_defect() <= 1e-9);
  CHECK_THROWS_AS(QuantumLevel(KahlerModel::round_sphere(), 100, 2), std::runtime_error);
}
