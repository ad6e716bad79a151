#pragma once

#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "btq/coherent.hpp"
#include "btq/operators.hpp"

namespace btq::asymptotics {

struct IllConditioned : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonPositiveSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Sample {
  int m = 0;
  cdouble value;
};

// Least-squares fit of value(m) ~ sum_j c_j m^{-j}, j = 0..order.
struct AsymptoticFit {
  std::vector<Sample> samples;
  int order = 0;
  std::vector<cdouble> coeffs;
  double residual = 0.0;  // max |fit - sample|
  double rate = 0.0;      // log-log decay slope; 0 when samples change sign
  cdouble eval(int m) const;
};

AsymptoticFit richardson_fit(std::span<const Sample> samples, int order);

// Slope of log(value) against log(1/m); requires strictly positive values.
double decay_rate(std::span<const Sample> samples);

// Thread-safe store of built levels for one model; levels build on demand and
// are immutable afterwards.
class LevelCache {
 public:
  explicit LevelCache(const geometry::KahlerModel& model, int n_res_override = 0);
  const geometry::KahlerModel& model() const { return model_; }
  int n_res_override() const { return n_res_; }
  const hilbert::QuantumLevel& level(int m);
  // Build the listed levels, at most `jobs` concurrently.
  void prebuild(std::span<const int> ms, int jobs);

 private:
  geometry::KahlerModel model_;
  int n_res_ = 0;
  std::mutex mu_;
  std::map<int, std::shared_future<std::shared_ptr<const hilbert::QuantumLevel>>> built_;
};

// First star-product coefficient, extracted pointwise: fit of
// sigma(m (T_f T_g - T_{fg}))(pt) over the ladder with order 2; c0 is the
// estimate. Also records how well the zeroth-order product sigma(T_f T_g)
// recovers f*g.
struct C1Result {
  std::vector<geometry::ChartPoint> pts;
  std::vector<cdouble> c1;
  std::vector<double> residuals;
  double c0_worst_rel = 0.0;
};

C1Result extract_C1(LevelCache& cache, const geometry::Observable& f,
                    const geometry::Observable& g, std::span<const int> m_list,
                    std::span<const geometry::ChartPoint> pts);

enum class ExperimentKind {
  Norms,
  Dirac,
  Product,
  Berezin,
  Star,
  Trace,
  Spectral,
  UmExpand,
  FsPullback,
};

const char* kind_name(ExperimentKind kind);

std::vector<int> default_ladder(const geometry::KahlerModel& model);

struct ExperimentSpec {
  geometry::KahlerModel model = geometry::KahlerModel::round_sphere();
  ExperimentKind kind = ExperimentKind::Norms;
  std::vector<std::string> observables;
  std::vector<int> ladder;  // empty selects the model default
  int n_res = 0;            // 0 selects the per-level default policy
  std::map<std::string, double> thresholds;  // overrides for named checks
};

struct SampleRow {
  std::string series;
  int m = 0;
  double value = 0.0;
};

struct FitRow {
  std::string series;
  int order = 0;
  std::vector<double> coeff_re, coeff_im;
  double residual = 0.0;
  double rate = 0.0;
};

struct CheckRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "=="
  bool pass = false;
};

struct LevelInfo {
  int m = 0;
  int n_res = 0;
  double ortho_defect = 0.0;
  double resolution_drift = 0.0;
  bool retried = false;
};

struct Report {
  std::string model;
  std::string kind;
  std::vector<std::string> observables;
  std::vector<int> ladder;
  std::vector<SampleRow> samples;
  std::vector<FitRow> fits;
  std::vector<CheckRow> checks;
  std::vector<LevelInfo> levels;
  bool pass = true;
  // timing is reported separately so numeric content stays rerun-identical
  std::vector<std::pair<std::string, double>> timing;
  double wall_total = 0.0;
};

// Runs one experiment; `cache` may be shared across experiments on the same
// model (pass nullptr to use a private cache). `jobs` caps level prebuilds.
Report run_experiment(const ExperimentSpec& spec, LevelCache* cache = nullptr,
                      int jobs = 1);

}  // namespace btq::asymptotics
