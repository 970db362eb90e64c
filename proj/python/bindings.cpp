#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ntkmmd/bench.hpp"
#include "ntkmmd/cli.hpp"
#include "ntkmmd/calibration.hpp"
#include "ntkmmd/changepoint.hpp"
#include "ntkmmd/error.hpp"
#include "ntkmmd/io.hpp"
#include "ntkmmd/kernels.hpp"
#include "ntkmmd/mmd.hpp"
#include "ntkmmd/netcore.hpp"
#include "ntkmmd/trainer.hpp"
#include "ntkmmd/version.hpp"

namespace py = pybind11;
using namespace ntkmmd;

namespace {

// NumPy arrays arrive column-major or row-major; copy into the library layout.
using AnyMatrix = Eigen::MatrixXd;

TwoSample two_sample(const AnyMatrix& x, const AnyMatrix& y) { return TwoSample{x, y}; }

py::dict outcome_dict(const TestOutcome& o) {
  return py::module_::import("json").attr("loads")(to_json(o, true).dump());
}

NetworkShape shape_of(std::vector<int> widths, const std::string& activation, bool train_output) {
  NetworkShape s;
  s.hidden_widths = std::move(widths);
  s.activation = parse_activation(activation);
  s.train_output_layer = train_output;
  return s;
}

TrainConfig train_of(double lr, int epochs, int batch_size, const std::string& order,
                     std::uint64_t order_seed) {
  TrainConfig t;
  t.learning_rate = lr;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.order = order == "given" ? SampleOrder::given : SampleOrder::shuffled;
  t.order_seed = order_seed;
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "NTK-MMD two-sample tests";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<NetworkParams>(m, "NetworkParams")
      .def_property_readonly("input_dim", [](const NetworkParams& p) { return p.config.input_dim; })
      .def_property_readonly("hidden_widths", [](const NetworkParams& p) { return p.config.hidden_widths; })
      .def_property_readonly("activation", [](const NetworkParams& p) { return std::string(to_string(p.config.activation)); })
      .def_property_readonly("output", [](const NetworkParams& p) { return p.output; })
      .def("trainable", &NetworkParams::flatten_trainable)
      .def("set_trainable", [](NetworkParams& p, const Vector& v) { p.assign_trainable(v); })
      .def("hidden_weights", [](const NetworkParams& p, std::size_t l) { return Matrix(p.hidden.at(l).weights); })
      .def("hidden_bias", [](const NetworkParams& p, std::size_t l) { return Vector(p.hidden.at(l).bias); });

  m.def(
      "init_params",
      [](int input_dim, std::vector<int> widths, const std::string& activation, bool train_output,
         std::uint64_t seed) {
        return init_params(NetworkConfig{input_dim, std::move(widths), parse_activation(activation), train_output}, seed);
      },
      py::arg("input_dim"), py::arg("hidden_widths") = std::vector<int>{512}, py::arg("activation") = "softplus",
      py::arg("train_output_layer") = false, py::arg("seed") = 0);
  m.def("forward", [](const NetworkParams& p, const Vector& x) { return forward(p, x); });
  m.def("forward_batch", [](const NetworkParams& p, const AnyMatrix& x) { return forward_batch(p, x); });
  m.def("param_gradient", [](const NetworkParams& p, const Vector& x) { return param_gradient(p, x); });

  m.def("ntk_analytic2", [](const NetworkParams& p, const Vector& a, const Vector& b) { return ntk_analytic2(p, a, b); });
  m.def("ntk_pair", [](const NetworkParams& p, const Vector& a, const Vector& b) {
    return kernel_pair(make_ntk_feature(p), a, b);
  });
  m.def("ntk_gram", [](const NetworkParams& p, const AnyMatrix& a, const AnyMatrix& b) {
    return gram(make_ntk(p), a, b).values;
  });
  m.def("gaussian_gram", [](double bw, const AnyMatrix& a, const AnyMatrix& b) {
    return gram(make_gaussian(bw), a, b).values;
  });
  m.def("median_bandwidth", [](const AnyMatrix& z) { return median_bandwidth(z); });

  m.def("mmd2_biased", [](double bw, const AnyMatrix& x, const AnyMatrix& y) {
    return mmd2_biased(make_gaussian(bw), two_sample(x, y));
  }, py::arg("bandwidth"), py::arg("x"), py::arg("y"));
  m.def("mmd2_unbiased", [](double bw, const AnyMatrix& x, const AnyMatrix& y) {
    return mmd2_unbiased(make_gaussian(bw), two_sample(x, y));
  }, py::arg("bandwidth"), py::arg("x"), py::arg("y"));
  m.def("ntk_mmd2_biased", [](const NetworkParams& p, const AnyMatrix& x, const AnyMatrix& y) {
    return mmd2_biased(make_ntk(p), two_sample(x, y));
  });

  m.def(
      "train_t_net",
      [](const NetworkParams& p0, const AnyMatrix& x, const AnyMatrix& y, const AnyMatrix& eval_x,
         const AnyMatrix& eval_y, double lr, int epochs, int batch_size, const std::string& order,
         std::uint64_t order_seed) {
        const auto tp = train_online(p0, two_sample(x, y), train_of(lr, epochs, batch_size, order, order_seed));
        return py::make_tuple(t_net(tp, two_sample(eval_x, eval_y)), tp.final);
      },
      py::arg("params"), py::arg("x"), py::arg("y"), py::arg("eval_x"), py::arg("eval_y"),
      py::arg("learning_rate") = 0.1, py::arg("epochs") = 1, py::arg("batch_size") = 1,
      py::arg("order") = "shuffled", py::arg("order_seed") = 0);

  m.def("empirical_quantile", [](std::vector<double> v, double level) { return empirical_quantile(v, level); });
  m.def(
      "theoretical_threshold",
      [](const std::string& variant, double alpha, double c, long long n, double nu, double gamma) {
        ThresholdParams tp;
        tp.variant = parse_threshold_variant(variant);
        tp.alpha_level = alpha;
        tp.c = c;
        tp.n = n;
        tp.nu = nu;
        tp.gamma = gamma;
        return theoretical_threshold(tp);
      },
      py::arg("variant"), py::arg("alpha"), py::arg("c"), py::arg("n"), py::arg("nu"), py::arg("gamma") = 0.05);

  m.def(
      "generate",
      [](const std::string& kind, double magnitude, int dim, int n_x, int n_y, std::uint64_t seed) {
        const auto s = generate(ShiftSpec{parse_shift_kind(kind), magnitude, dim, n_x, n_y, seed});
        return py::make_tuple(Matrix(s.x), Matrix(s.y));
      },
      py::arg("kind"), py::arg("magnitude"), py::arg("dim"), py::arg("n_x"), py::arg("n_y"), py::arg("seed"));
  m.def("hotelling_t2", [](const AnyMatrix& x, const AnyMatrix& y) { return hotelling_t2(two_sample(x, y)); });

  m.def(
      "run_test",
      [](const AnyMatrix& x, const AnyMatrix& y, const std::string& method, std::uint64_t seed,
         double alpha, int n_boot, const std::string& calibration, std::vector<int> widths,
         const std::string& activation, double lr, double train_fraction) {
        RunConfig cfg;
        cfg.method = parse_method(method);
        cfg.calibration = parse_calibration(calibration);
        cfg.alpha_level = alpha;
        cfg.n_boot = n_boot;
        cfg.train_fraction = train_fraction;
        cfg.network = shape_of(std::move(widths), activation, false);
        cfg.train.learning_rate = lr;
        cfg.keep_null_samples = true;
        py::gil_scoped_release release;
        const auto out = run_test(two_sample(x, y), cfg, seed);
        py::gil_scoped_acquire acquire;
        return outcome_dict(out);
      },
      py::arg("x"), py::arg("y"), py::arg("method") = "ntk_net", py::arg("seed") = 0, py::arg("alpha") = 0.05,
      py::arg("n_boot") = 400, py::arg("calibration") = "auto", py::arg("hidden_widths") = std::vector<int>{512},
      py::arg("activation") = "softplus", py::arg("learning_rate") = 0.1, py::arg("train_fraction") = 0.5);

  m.def(
      "estimate_power",
      [](const std::string& kind, double magnitude, int dim, int n_x, int n_y, const std::string& method,
         std::size_t n_run, std::uint64_t seed, int n_boot, std::vector<int> widths, std::size_t threads) {
        RunConfig cfg;
        cfg.method = parse_method(method);
        cfg.n_boot = n_boot;
        cfg.network = shape_of(std::move(widths), "softplus", false);
        cfg.threads = threads;
        py::gil_scoped_release release;
        const auto s = estimate_power(ShiftSpec{parse_shift_kind(kind), magnitude, dim, n_x, n_y, 0}, cfg, n_run, seed);
        py::gil_scoped_acquire acquire;
        return py::make_tuple(s.overall.power, s.overall.wilson_ci_95);
      },
      py::arg("kind"), py::arg("magnitude"), py::arg("dim"), py::arg("n_x"), py::arg("n_y"),
      py::arg("method") = "ntk_net", py::arg("n_run") = 100, py::arg("seed") = 0, py::arg("n_boot") = 400,
      py::arg("hidden_widths") = std::vector<int>{512}, py::arg("threads") = 0);

  m.def(
      "scan",
      [](const AnyMatrix& series, int window, int stride, int pilot_start, int pilot_end,
         const std::string& statistic, std::uint64_t seed, std::optional<double> threshold,
         std::vector<int> widths) {
        ScanConfig cfg;
        cfg.window = window;
        cfg.stride = stride;
        cfg.pilot_start = pilot_start;
        cfg.pilot_end = pilot_end;
        cfg.statistic = parse_method(statistic);
        cfg.seed = seed;
        cfg.network = shape_of(std::move(widths), "softplus", false);
        const auto t = scan(series, cfg, threshold);
        return py::make_tuple(t.times, t.values, t.first_alarm);
      },
      py::arg("series"), py::arg("window") = 100, py::arg("stride") = 10, py::arg("pilot_start") = 0,
      py::arg("pilot_end") = 200, py::arg("statistic") = "ntk_net", py::arg("seed") = 0,
      py::arg("threshold") = py::none(), py::arg("hidden_widths") = std::vector<int>{512});

  m.def("cli", [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
