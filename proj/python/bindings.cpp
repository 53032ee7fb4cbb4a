#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nlsvd/analysis.hpp"
#include "nlsvd/attack.hpp"
#include "nlsvd/config.hpp"
#include "nlsvd/dataset.hpp"
#include "nlsvd/error.hpp"
#include "nlsvd/gsvd.hpp"
#include "nlsvd/runner.hpp"
#include "nlsvd/svdnet.hpp"
#include "nlsvd/traversal.hpp"

namespace py = pybind11;
using namespace nlsvd;

namespace {

using VecRef = const std::vector<double>&;

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

Matrix from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::InvalidInput, "expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

// Wraps a Python callable; it runs with the GIL held by the calling thread.
BlackBox python_blackbox(std::size_t d_in, std::size_t d_out, py::function fn) {
  return BlackBox(d_in, d_out, [fn = std::move(fn), d_out](std::span<const double> x) {
    py::gil_scoped_acquire gil;
    auto y = fn(std::vector<double>(x.begin(), x.end())).cast<std::vector<double>>();
    if (y.size() != d_out) throw Error(ErrorKind::InvalidInput, "black box returned wrong size");
    return y;
  });
}

}  // namespace

PYBIND11_MODULE(_nlsvd, m) {
  m.doc() = "Nonlinear SVD construction, SVD networks and lifted-space attacks";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error(m, "NlsvdError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::reinterpret_borrow<py::object>(error);
      py::object exc = type(std::string(e.name()) + ": " + e.what());
      exc.attr("kind") = std::string(e.name());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<BlackBox>(m, "BlackBox")
      .def(py::init(&python_blackbox), py::arg("d_in"), py::arg("d_out"), py::arg("fn"))
      .def_property_readonly("d_in", &BlackBox::d_in)
      .def_property_readonly("d_out", &BlackBox::d_out)
      .def_property_readonly("query_count", &BlackBox::query_count)
      .def("evaluate", [](const BlackBox& f, VecRef x) { return f.evaluate(x); })
      .def("__call__", [](const BlackBox& f, VecRef x) { return f.evaluate(x); });
  m.def("linear_blackbox", [](const py::array_t<double>& a) { return linear_blackbox(from_array(a)); });
  m.def("anchored", [](const BlackBox& f, VecRef x_star) { return anchored(f, x_star); });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def(py::init([](std::vector<Vector> x, std::optional<std::vector<std::size_t>> labels) {
             Dataset d;
             d.x = std::move(x);
             d.labels = std::move(labels);
             if (d.labels && !d.labels->empty()) {
               d.num_classes = *std::max_element(d.labels->begin(), d.labels->end()) + 1;
             }
             d.validate();
             return d;
           }),
           py::arg("x"), py::arg("labels") = py::none())
      .def_readwrite("x", &Dataset::x)
      .def_readwrite("labels", &Dataset::labels)
      .def_readwrite("num_classes", &Dataset::num_classes)
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def("class_counts", &Dataset::class_counts);
  m.def("synth_blobs", &synth_blobs, py::arg("classes"), py::arg("per_class"), py::arg("dim"),
        py::arg("separation"), py::arg("seed"));
  m.def("read_idx", &read_idx, py::arg("images"), py::arg("labels"), py::arg("limit") = py::none());
  m.def("split", &split, py::arg("data"), py::arg("first_count"), py::arg("seed"));

  py::class_<GsvdModel>(m, "GsvdModel")
      .def_readonly("d_in", &GsvdModel::d_in)
      .def_readonly("d_out", &GsvdModel::d_out)
      .def_readonly("epsilon", &GsvdModel::epsilon)
      .def_readonly("perm", &GsvdModel::perm)
      .def_readonly("alpha", &GsvdModel::alpha)
      .def_readonly("sigma", &GsvdModel::sigma)
      .def_readonly("anchor", &GsvdModel::anchor)
      .def("to_json", [](const GsvdModel& g) { return to_json(g); })
      .def_static("from_json", &gsvd_from_json);
  m.def("estimate_gains", [](const BlackBox& f, const std::vector<Vector>& data) {
    return estimate_gains(f, data);
  });
  m.def(
      "build", [](const BlackBox& f, VecRef alpha, double eps) { return build(f, alpha, eps); },
      py::arg("f"), py::arg("alpha"), py::arg("epsilon") = kDefaultSlack);
  m.def("gamma", [](const GsvdModel& g, const BlackBox& f, VecRef x) { return gamma(g, f, x); });
  m.def("lift", [](const GsvdModel& g, const BlackBox& f, VecRef x) { return lift(g, f, x).values(); });
  m.def("left_inverse", [](const GsvdModel& g, VecRef z) {
    return left_inverse(g, LiftedPoint(z, g.d_out));
  });
  m.def("reconstruct", [](const GsvdModel& g, const BlackBox& f, VecRef x) {
    return reconstruct(g, f, x);
  });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("on_value", &TrainConfig::on_value)
      .def_readwrite("off_value", &TrainConfig::off_value)
      .def_readwrite("sv_cutoff", &TrainConfig::sv_cutoff)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("encode_dim", &TrainConfig::encode_dim)
      .def_readwrite("encoding_scale", &TrainConfig::encoding_scale);

  py::class_<SvdNet>(m, "SvdNet")
      .def_property_readonly("d_in", &SvdNet::d_in)
      .def_property_readonly("encode_dim", &SvdNet::encode_dim)
      .def_property_readonly("classes", &SvdNet::classes)
      .def_property_readonly("head", [](const SvdNet& n) { return to_array(n.head); })
      .def("parameters", &SvdNet::parameters)
      .def("logits", [](const SvdNet& n, VecRef x) { return logits(n, x); })
      .def("encode", [](const SvdNet& n, VecRef x) { return encode(n, x); })
      .def("decode", [](const SvdNet& n, VecRef z) { return decode(n, z); })
      .def("accuracy", [](const SvdNet& n, const Dataset& d) { return accuracy(n, d); })
      .def("head_singular_values", [](const SvdNet& n) { return extract_head_svd(n).s; })
      .def("lipschitz_upper_bound", [](const SvdNet& n) { return lipschitz_upper_bound(n); })
      .def("rescale_latent", [](const SvdNet& n, double c) { return rescale_latent(n, c); })
      .def("blackbox", [](const SvdNet& n) { return logit_blackbox(n); })
      .def("save", [](const SvdNet& n, const std::string& path) { save_checkpoint(n, path); })
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); });
  m.def("train", [](const Dataset& d, const TrainConfig& c) { return train(d, c).net; },
        py::arg("data"), py::arg("config") = TrainConfig{});
  m.def("svdnet_gain_truth", &svdnet_gain_truth);

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("recon_mse", &ValidationReport::recon_mse)
      .def_readonly("left_inv_err", &ValidationReport::left_inv_err)
      .def_readonly("norm_pres_err", &ValidationReport::norm_pres_err)
      .def_readonly("gain_recovery_sampled", &ValidationReport::gain_recovery_sampled)
      .def_readonly("gain_violations", &ValidationReport::gain_violations)
      .def_readonly("min_gamma", &ValidationReport::min_gamma)
      .def_readonly("samples", &ValidationReport::samples)
      .def("to_json", [](const ValidationReport& r) { return to_json(r); });
  m.def(
      "validate",
      [](const GsvdModel& g, const BlackBox& f, const Dataset& d, std::optional<Vector> truth) {
        std::optional<GainReference> ref;
        if (truth) ref = GainReference{*truth, std::nullopt, std::nullopt};
        return validate(g, f, d, ref);
      },
      py::arg("model"), py::arg("f"), py::arg("holdout"), py::arg("true_alpha") = py::none());
  m.def("null_energy_fraction", [](const SvdNet& n, const std::vector<Vector>& xs) {
    return null_energy_fraction(n, xs);
  });
  m.def("sigma_ratio", [](const SvdNet& n) { return sigma_ratio(n); });

  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init<>())
      .def_readwrite("step", &AttackConfig::step)
      .def_readwrite("budget", &AttackConfig::budget)
      .def_readwrite("fd_eps", &AttackConfig::fd_eps)
      .def_readwrite("clip_lo", &AttackConfig::clip_lo)
      .def_readwrite("clip_hi", &AttackConfig::clip_hi)
      .def_readwrite("central_differences", &AttackConfig::central_differences)
      .def_readwrite("fixed_target", &AttackConfig::fixed_target);
  py::class_<AttackResult>(m, "AttackResult")
      .def_readonly("success", &AttackResult::success)
      .def_readonly("eta", &AttackResult::eta)
      .def_readonly("eta_norm", &AttackResult::eta_norm)
      .def_readonly("target_idx", &AttackResult::target_idx)
      .def_readonly("source_idx", &AttackResult::source_idx)
      .def_readonly("queries", &AttackResult::queries)
      .def_readonly("probes", &AttackResult::probes)
      .def_readonly("reason", &AttackResult::reason);
  m.def(
      "run_attack",
      [](const GsvdModel& g, const BlackBox& f, VecRef x0, const AttackConfig& c) {
        return run_attack(g, f, x0, c);
      },
      py::arg("model"), py::arg("f"), py::arg("x0"), py::arg("config") = AttackConfig{});

  m.def("null_sample", &null_sample, py::arg("net"), py::arg("class_idx"),
        py::arg("noise_scale"), py::arg("seed"), py::arg("target_scale") = 1.0);
  py::class_<NullSample>(m, "NullSample")
      .def_readonly("image", &NullSample::image)
      .def_readonly("code", &NullSample::code);

  m.def("parse_config", [](const std::string& text) { return serialize(parse_config(text)); },
        "Validates a JSON config and returns its canonical form.");
  m.def(
      "run",
      [](const std::string& subcommand, const std::string& config_json, const std::string& out) {
        RunConfig cfg = parse_config(config_json);
        if (!out.empty()) cfg.output_dir = out;
        std::ostringstream log;
        run(subcommand, cfg, log);
        return log.str();
      },
      py::arg("subcommand"), py::arg("config_json") = "{}", py::arg("output_dir") = "",
      "Runs one CLI subcommand in-process and returns its log.");
}
