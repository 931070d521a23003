#include "oeg/causal.hpp"
#include "oeg/dynamics.hpp"
#include "oeg/error.hpp"
#include "oeg/gpr.hpp"
#include "oeg/manifold.hpp"
#include "oeg/synth.hpp"
#include "oeg/ubm.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

oeg::manifold::GramFactor factor(const Matrix& points, double eps) {
  oeg::manifold::ManifoldConfig cfg;
  cfg.eps = eps;
  return oeg::manifold::polar_factor({points, false}, cfg);
}

oeg::Tensor3 to_tensor(const py::array_t<double, py::array::f_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw py::value_error("expected a 3-d array");
  oeg::Tensor3 t({a.shape(0), a.shape(1), a.shape(2)});
  std::copy(a.data(), a.data() + a.size(), t.flat().data());
  return t;
}

py::array_t<double> from_tensor(const oeg::Tensor3& t) {
  py::array_t<double, py::array::f_style> out({t.dim(0), t.dim(1), t.dim(2)});
  std::copy(t.flat().data(), t.flat().data() + t.size(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Face-dynamics geometry, VAR features, background-model supervectors, GP and Tucker tools";

  static py::exception<oeg::Error> error(m, "OegError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const oeg::Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "principal_angles",
      [](const Matrix& a, const Matrix& b, double eps) {
        return oeg::manifold::principal_angles(factor(a, eps), factor(b, eps)).angles;
      },
      py::arg("x1"), py::arg("x2"), py::arg("eps") = 1e-8,
      "Principal angles (ascending) between the column spans of two centered landmark frames.");

  m.def(
      "psd_distance",
      [](const Matrix& a, const Matrix& b, double k, double eps) {
        oeg::manifold::ManifoldConfig cfg{k, eps};
        return oeg::manifold::psd_distance(factor(a, eps), factor(b, eps), cfg);
      },
      py::arg("x1"), py::arg("x2"), py::arg("k") = 1.0, py::arg("eps") = 1e-8,
      "Squared shape-geodesic length between two landmark frames.");

  m.def(
      "geodesic_velocity",
      [](const std::vector<Matrix>& frames, double frame_rate, double k) {
        oeg::manifold::LandmarkSequence seq;
        seq.frame_rate = frame_rate;
        for (const auto& f : frames) seq.frames.push_back({f, false});
        oeg::manifold::ManifoldConfig cfg;
        cfg.k = k;
        return oeg::manifold::geodesic_velocity_series(seq, cfg).values;
      },
      py::arg("frames"), py::arg("frame_rate") = 25.0, py::arg("k") = 1.0,
      "Per-step velocity features of a landmark sequence; one row per consecutive frame pair.");

  m.def(
      "fit_var",
      [](const Matrix& block, int order) {
        const auto model = oeg::dynamics::fit_var(block, order);
        py::dict out;
        out["intercept"] = model.intercept;
        out["coeffs"] = model.coeffs;
        out["stderr"] = model.coeff_stderr;
        out["residual_cov"] = model.residual_cov;
        out["ridge"] = model.ridge;
        out["vector"] = oeg::dynamics::vectorize_coefficients(model);
        return out;
      },
      py::arg("block"), py::arg("order") = 3, "Least-squares VAR fit with intercept.");

  py::class_<oeg::ubm::GmmModel>(m, "Gmm")
      .def_readonly("weights", &oeg::ubm::GmmModel::weights)
      .def_readonly("means", &oeg::ubm::GmmModel::means)
      .def_readonly("variances", &oeg::ubm::GmmModel::variances)
      .def_property_readonly("fingerprint", &oeg::ubm::GmmModel::fingerprint)
      .def("log_likelihood", [](const oeg::ubm::GmmModel& g, const Vector& x) { return g.log_likelihood(x); });

  m.def(
      "train_ubm",
      [](const Matrix& atoms, Eigen::Index components, std::uint64_t seed, int max_iters) {
        oeg::ubm::EmOptions opt;
        opt.components = components;
        opt.seed = seed;
        opt.max_iters = max_iters;
        oeg::ubm::EmTrace trace;
        auto model = oeg::ubm::train_em(atoms, opt, &trace);
        return py::make_tuple(model, trace.mean_log_likelihood);
      },
      py::arg("atoms"), py::arg("components") = 64, py::arg("seed") = 7, py::arg("max_iters") = 50,
      "Train a diagonal GMM; returns (model, mean log-likelihood trace).");

  m.def(
      "supervector",
      [](const oeg::ubm::GmmModel& prior, const Matrix& atoms, double relevance) {
        const auto stats = oeg::ubm::accumulate(prior, atoms);
        return oeg::ubm::supervector(oeg::ubm::map_adapt(stats, prior, relevance), prior).values;
      },
      py::arg("prior"), py::arg("atoms"), py::arg("relevance") = 16.0, "MAP-adapted supervector of one recording.");

  m.def(
      "loso_cv",
      [](const Matrix& x, const Vector& y, const std::vector<std::string>& subjects, double bias_var,
         double noise_var) {
        if (x.rows() != y.size() || static_cast<std::size_t>(x.rows()) != subjects.size()) {
          throw py::value_error("x, y and subjects differ in length");
        }
        std::vector<oeg::gpr::Sample> samples;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          samples.push_back({subjects[static_cast<std::size_t>(i)], std::to_string(i), x.row(i).transpose(), y(i)});
        }
        const auto r = oeg::gpr::loso_cv(samples, {bias_var, noise_var, true});
        Vector pred(static_cast<Eigen::Index>(r.predictions.size()));
        for (std::size_t i = 0; i < r.predictions.size(); ++i) pred(static_cast<Eigen::Index>(i)) = r.predictions[i].y_pred;
        return py::make_tuple(r.pearson_r, pred);
      },
      py::arg("x"), py::arg("y"), py::arg("subjects"), py::arg("bias_var") = 1.0, py::arg("noise_var") = 0.1,
      "Leave-one-subject-out GP regression; returns (pearson_r, predictions in subject order).");

  m.def("responder", &oeg::gpr::responder_label, py::arg("hamd_in"), py::arg("hamd_out"),
        "True when the HAMD score dropped by at least 30 percent.");

  m.def(
      "hosvd",
      [](const py::array_t<double, py::array::f_style | py::array::forcecast>& data, std::array<Eigen::Index, 3> ranks) {
        const auto model = oeg::causal::hosvd(to_tensor(data), ranks);
        return py::make_tuple(from_tensor(model.core), std::vector<Matrix>(model.modes.begin(), model.modes.end()),
                              model.reconstruction_error);
      },
      py::arg("data"), py::arg("ranks") = std::array<Eigen::Index, 3>{0, 0, 0},
      "Higher-order SVD; returns (core, [U1, U2, U3], reconstruction error). Rank 0 keeps a mode whole.");

  m.def("categories", [] {
    std::vector<std::string> out;
    for (auto n : oeg::causal::category_names()) out.emplace_back(n);
    return out;
  });

  m.def(
      "synth_subject",
      [](const std::string& regime, Eigen::Index frames, std::uint64_t seed, int index, double separation) {
        const auto r = oeg::synth::make_regime(oeg::causal::parse_patient_type(regime), separation);
        const auto rec = oeg::synth::generate_subject(r, frames, 25.0, seed, index);
        std::vector<Matrix> out;
        for (const auto& f : rec.landmarks.frames) out.push_back(f.points);
        return py::make_tuple(out, rec.aux, rec.latent);
      },
      py::arg("regime"), py::arg("frames"), py::arg("seed") = 1, py::arg("index") = 0, py::arg("separation") = 1.0,
      "One synthetic recording at 25 fps: (landmark frames, aux channels, latent state).");
}
