#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "btq/acceptance.hpp"
#include "btq/asymptotics.hpp"
#include "btq/geometry.hpp"
#include "btq/hilbert.hpp"
#include "btq/numerics.hpp"
#include "btq/operators.hpp"

namespace py = pybind11;
namespace asym = btq::asymptotics;
namespace geom = btq::geometry;
namespace ops = btq::operators;

namespace {

py::array_t<std::complex<double>> matrix_to_numpy(const btq::numerics::ComplexMatrix& a) {
  py::array_t<std::complex<double>> out(
      std::vector<py::ssize_t>{a.rows(), a.cols()});
  auto r = out.mutable_unchecked<2>();
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r(i, j) = a.at(i, j);
  return out;
}

asym::ExperimentKind kind_from_string(const std::string& name) {
  using K = asym::ExperimentKind;
  for (K k : {K::Norms, K::Dirac, K::Product, K::Berezin, K::Star, K::Trace,
              K::Spectral, K::UmExpand, K::FsPullback})
    if (name == asym::kind_name(k)) return k;
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

py::dict report_to_dict(const asym::Report& rep) {
  py::dict d;
  d["model"] = rep.model;
  d["kind"] = rep.kind;
  d["observables"] = rep.observables;
  d["ladder"] = rep.ladder;
  py::list samples;
  for (const auto& s : rep.samples) {
    py::dict row;
    row["series"] = s.series;
    row["m"] = s.m;
    row["value"] = s.value;
    samples.append(row);
  }
  d["samples"] = samples;
  py::list fits;
  for (const auto& f : rep.fits) {
    py::dict row;
    row["series"] = f.series;
    row["order"] = f.order;
    row["coeff_re"] = f.coeff_re;
    row["coeff_im"] = f.coeff_im;
    row["residual"] = f.residual;
    row["rate"] = f.rate;
    fits.append(row);
  }
  d["fits"] = fits;
  py::list checks;
  for (const auto& c : rep.checks) {
    py::dict row;
    row["name"] = c.name;
    row["value"] = c.value;
    row["threshold"] = c.threshold;
    row["relation"] = c.relation;
    row["pass"] = c.pass;
    checks.append(row);
  }
  d["checks"] = checks;
  py::list levels;
  for (const auto& l : rep.levels) {
    py::dict row;
    row["m"] = l.m;
    row["n_res"] = l.n_res;
    row["ortho_defect"] = l.ortho_defect;
    row["resolution_drift"] = l.resolution_drift;
    row["retried"] = l.retried;
    levels.append(row);
  }
  d["levels"] = levels;
  d["pass"] = rep.pass;
  d["wall_total"] = rep.wall_total;
  return d;
}

// Owns a level cache for one model so repeated operator requests at the same
// level reuse the built basis.
struct Lab {
  asym::LevelCache cache;
  Lab(const geom::KahlerModel& model, int n_res) : cache(model, n_res) {}

  const btq::hilbert::QuantumLevel& level(int m) { return cache.level(m); }
  ops::ToeplitzOp op(const std::string& name, int m) {
    return ops::toeplitz(level(m), geom::find_observable(cache.model(), name));
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "semiclassical quantization laboratory";
  m.attr("__version__") = "1.0.0";

  py::class_<geom::KahlerModel>(m, "Model")
      .def_property_readonly("name", &geom::KahlerModel::name)
      .def("sections_dim", &geom::KahlerModel::sections_dim, py::arg("m"))
      .def("__repr__", [](const geom::KahlerModel& model) {
        return "<btq.Model " + model.name() + ">";
      });

  m.def("round_sphere", &geom::KahlerModel::round_sphere,
        "unit sphere with the round metric");
  m.def("deformed_sphere", &geom::KahlerModel::deformed_sphere,
        py::arg("epsilon") = 0.1, "sphere with a conformally deformed metric");
  m.def(
      "torus",
      [](double tau_re, double tau_im) {
        return geom::KahlerModel::torus(btq::cdouble(tau_re, tau_im));
      },
      py::arg("tau_re") = 0.0, py::arg("tau_im") = 1.0,
      "flat torus with modulus tau");

  m.def("models", [] {
    return std::vector<std::string>{"round_sphere", "deformed_sphere", "torus"};
  });
  m.def(
      "observables",
      [](const geom::KahlerModel& model) {
        std::vector<std::string> names;
        for (const auto& obs : geom::builtin_observables(model))
          names.push_back(obs.name);
        return names;
      },
      py::arg("model"), "names of the built-in observables for a model");
  m.def("default_ladder", &asym::default_ladder, py::arg("model"));

  py::class_<Lab>(m, "Lab")
      .def(py::init<const geom::KahlerModel&, int>(), py::arg("model"),
           py::arg("n_res") = 0)
      .def_property_readonly("model",
                             [](Lab& lab) { return lab.cache.model(); })
      .def(
          "dim", [](Lab& lab, int m) { return lab.level(m).dim(); },
          py::arg("m"), "dimension of the section space at level m")
      .def(
          "toeplitz",
          [](Lab& lab, const std::string& name, int m) {
            return matrix_to_numpy(lab.op(name, m).matrix);
          },
          py::arg("name"), py::arg("m"),
          "matrix of the compression of an observable at level m")
      .def(
          "op_norm",
          [](Lab& lab, const std::string& name, int m) {
            return ops::op_norm(lab.op(name, m));
          },
          py::arg("name"), py::arg("m"))
      .def(
          "sup_norm",
          [](Lab& lab, const std::string& name, int m) {
            return ops::sup_norm(lab.level(m),
                                 geom::find_observable(lab.cache.model(), name));
          },
          py::arg("name"), py::arg("m"))
      .def(
          "dirac_defect",
          [](Lab& lab, const std::string& f, const std::string& g, int m) {
            return ops::dirac_defect(
                lab.level(m), geom::find_observable(lab.cache.model(), f),
                geom::find_observable(lab.cache.model(), g));
          },
          py::arg("f"), py::arg("g"), py::arg("m"),
          "norm of m*i*[T_f, T_g] - T_{{f,g}} at level m")
      .def(
          "product_defect",
          [](Lab& lab, const std::string& f, const std::string& g, int m) {
            return ops::product_defect(
                lab.level(m), geom::find_observable(lab.cache.model(), f),
                geom::find_observable(lab.cache.model(), g));
          },
          py::arg("f"), py::arg("g"), py::arg("m"),
          "norm of T_f T_g - T_{fg} at level m")
      .def(
          "prebuild",
          [](Lab& lab, std::vector<int> ms, int jobs) {
            py::gil_scoped_release release;
            lab.cache.prebuild(ms, jobs);
          },
          py::arg("ms"), py::arg("jobs") = 1);

  m.def(
      "run_experiment",
      [](const geom::KahlerModel& model, const std::string& kind,
         std::vector<std::string> observables, std::vector<int> ladder,
         int n_res, std::map<std::string, double> thresholds, int jobs) {
        asym::ExperimentSpec spec;
        spec.model = model;
        spec.kind = kind_from_string(kind);
        spec.observables = std::move(observables);
        spec.ladder = std::move(ladder);
        spec.n_res = n_res;
        spec.thresholds = std::move(thresholds);
        asym::Report rep;
        {
          py::gil_scoped_release release;
          rep = asym::run_experiment(spec, nullptr, jobs);
        }
        return report_to_dict(rep);
      },
      py::arg("model"), py::arg("kind"), py::arg("observables"),
      py::arg("ladder") = std::vector<int>{}, py::arg("n_res") = 0,
      py::arg("thresholds") = std::map<std::string, double>{},
      py::arg("jobs") = 1,
      "run one experiment and return the report as a dict");

  m.def(
      "acceptance",
      [](int jobs) {
        btq::acceptance::AcceptanceReport rep;
        {
          py::gil_scoped_release release;
          rep = btq::acceptance::run_acceptance(jobs);
        }
        py::list criteria;
        for (const auto& c : rep.criteria) {
          py::dict row;
          row["id"] = c.id;
          row["name"] = c.name;
          row["pass"] = c.pass;
          row["value"] = c.value;
          row["threshold"] = c.threshold;
          row["relation"] = c.relation;
          row["detail"] = c.detail;
          row["seconds"] = c.seconds;
          criteria.append(row);
        }
        py::dict d;
        d["criteria"] = criteria;
        d["all_pass"] = rep.all_pass;
        d["wall_total"] = rep.wall_total;
        return d;
      },
      py::arg("jobs") = 1, "run the full verification suite");
}
