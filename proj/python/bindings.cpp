#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tvlearn/adjoint.hpp"
#include "tvlearn/bilevel.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/grid.hpp"
#include "tvlearn/image_io.hpp"
#include "tvlearn/noise.hpp"
#include "tvlearn/phantom.hpp"
#include "tvlearn/regularizer.hpp"
#include "tvlearn/state_solver.hpp"

namespace py = pybind11;
using namespace tvlearn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Arrays are (ny, nx), row-major, matching ImageGrid storage.
ImageGrid to_grid(const Array& a, std::optional<double> h) {
  if (a.ndim() != 2) throw PreconditionError("expected a 2-D array");
  const auto ny = static_cast<std::size_t>(a.shape(0));
  const auto nx = static_cast<std::size_t>(a.shape(1));
  std::vector<double> v(a.data(), a.data() + a.size());
  return ImageGrid(nx, ny, h.value_or(ImageGrid::default_spacing(nx, ny)), std::move(v));
}

Array to_array(const ImageGrid& g) {
  Array out({g.ny(), g.nx()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v, std::size_t nx, std::size_t ny) {
  Array out({ny, nx});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict trace_dict(const SsnTrace& t) {
  py::dict d;
  d["residuals"] = t.residuals;
  d["iterations"] = t.iterations;
  d["converged"] = t.converged;
  d["damped_steps"] = t.damped_steps;
  d["line_search_failures"] = t.line_search_failures;
  d["clamp_events"] = t.clamp_events;
  return d;
}

py::dict result_dict(const BilevelResult& r) {
  py::dict d;
  d["lambda_star"] = r.lambda_star;
  d["cost"] = r.cost;
  d["converged"] = r.trace.converged;
  d["stop_reason"] = r.trace.stop_reason;
  py::list its;
  for (const auto& it : r.trace.iterations) {
    py::dict e;
    e["iter"] = it.iter;
    e["lambda"] = it.lambda;
    e["cost"] = it.cost;
    e["grad"] = it.grad;
    e["proj_grad_norm"] = it.proj_grad_norm;
    e["ssn_main"] = it.ssn_main;
    e["ssn_total"] = it.ssn_total;
    its.append(e);
  }
  d["iterations"] = its;
  d["kkt"] = py::dict(py::arg("stationarity") = r.trace.kkt.stationarity,
                      py::arg("complementarity") = r.trace.kkt.complementarity,
                      py::arg("feasibility") = r.trace.kkt.feasibility);
  d["mu"] = r.adjoint.mu;
  py::list us;
  for (const auto& u : r.u_star) us.append(to_array(u));
  d["u_star"] = us;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bilevel learning of TV denoising fidelity weights";
  m.attr("__version__") = TVLEARN_VERSION;

  // translators run newest first, so the base class goes in before its subclasses
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::enum_<HuberVariant>(m, "HuberVariant")
      .value("MaxForm", HuberVariant::MaxForm)
      .value("C1Form", HuberVariant::C1Form);
  py::enum_<NoiseModel>(m, "NoiseModel")
      .value("Gaussian", NoiseModel::Gaussian)
      .value("GaussPoisson", NoiseModel::GaussPoisson)
      .value("Impulse", NoiseModel::Impulse);
  py::enum_<Boundary>(m, "Boundary").value("Dirichlet", Boundary::Dirichlet).value("Neumann", Boundary::Neumann);
  py::enum_<GradMode>(m, "GradMode").value("ForwardFd", GradMode::ForwardFd).value("Adjoint", GradMode::Adjoint);

  py::class_<HuberParams>(m, "HuberParams")
      .def(py::init<>())
      .def(py::init([](double gamma, double g_cap, HuberVariant v) { return HuberParams{gamma, g_cap, v}; }),
           py::arg("gamma") = 100.0, py::arg("g_cap") = 1.0, py::arg("variant") = HuberVariant::MaxForm)
      .def_readwrite("gamma", &HuberParams::gamma)
      .def_readwrite("g_cap", &HuberParams::g_cap)
      .def_readwrite("variant", &HuberParams::variant);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &SolverConfig::epsilon)
      .def_readwrite("huber", &SolverConfig::huber)
      .def_readwrite("tol_ssn", &SolverConfig::tol_ssn)
      .def_readwrite("max_ssn", &SolverConfig::max_ssn)
      .def_readwrite("boundary", &SolverConfig::boundary)
      .def_readwrite("modified_newton", &SolverConfig::modified_newton)
      .def_readwrite("gamma_l1", &SolverConfig::gamma_l1)
      .def_readwrite("u_floor", &SolverConfig::u_floor);

  py::class_<BilevelConfig>(m, "BilevelConfig")
      .def(py::init<>())
      .def_readwrite("beta", &BilevelConfig::beta)
      .def_readwrite("alpha", &BilevelConfig::alpha)
      .def_readwrite("grad_mode", &BilevelConfig::grad_mode)
      .def_readwrite("fd_rel_step", &BilevelConfig::fd_rel_step)
      .def_readwrite("tol_grad", &BilevelConfig::tol_grad)
      .def_readwrite("tol_cost", &BilevelConfig::tol_cost)
      .def_readwrite("max_iter", &BilevelConfig::max_iter)
      .def_readwrite("lambda0", &BilevelConfig::lambda0)
      .def_readwrite("backtracking", &BilevelConfig::backtracking);

  m.def("grad", [](const Array& u, std::optional<double> h, Boundary bc) {
        const ImageGrid g = to_grid(u, h);
        const VectorField q = grad(g, bc);
        return py::make_tuple(to_array(q.qx, q.nx, q.ny), to_array(q.qy, q.nx, q.ny));
      }, py::arg("u"), py::arg("h") = py::none(), py::arg("boundary") = Boundary::Dirichlet);
  m.def("div", [](const Array& qx, const Array& qy, std::optional<double> h, Boundary bc) {
        const ImageGrid gx = to_grid(qx, h), gy = to_grid(qy, h);
        if (!gx.same_shape(gy)) throw PreconditionError("div: qx and qy differ in shape");
        VectorField q(gx);
        std::copy(gx.values().begin(), gx.values().end(), q.qx.begin());
        std::copy(gy.values().begin(), gy.values().end(), q.qy.begin());
        return to_array(div(q, bc));
      }, py::arg("qx"), py::arg("qy"), py::arg("h") = py::none(), py::arg("boundary") = Boundary::Dirichlet);
  m.def("inner", [](const Array& a, const Array& b, std::optional<double> h) {
        return inner(to_grid(a, h), to_grid(b, h));
      }, py::arg("a"), py::arg("b"), py::arg("h") = py::none());

  m.def("huber_value", [](double zx, double zy, const HuberParams& p) { return huber_value({zx, zy}, p); },
        py::arg("zx"), py::arg("zy"), py::arg("params") = HuberParams{});
  m.def("h_gamma", [](double zx, double zy, const HuberParams& p) {
        const Vec2 v = h_gamma({zx, zy}, p);
        return py::make_tuple(v[0], v[1]);
      }, py::arg("zx"), py::arg("zy"), py::arg("params") = HuberParams{});

  m.def("phantom", [](const std::string& name, std::size_t nx, std::optional<std::size_t> ny) {
        return to_array(make_phantom(name, nx, ny.value_or(nx)));
      }, py::arg("name") = "mixed", py::arg("nx") = 32, py::arg("ny") = py::none());
  m.def("add_noise", [](const Array& img, const std::string& kind, double variance, double mean, double scale,
                        double density, std::uint64_t seed) {
        NoiseSpec spec{noise_kind_from_string(kind), mean, variance, scale, density};
        return to_array(add_noise(to_grid(img, std::nullopt), spec, seed));
      }, py::arg("image"), py::arg("kind") = "gaussian", py::arg("variance") = 0.0, py::arg("mean") = 0.0,
      py::arg("scale") = 1.0, py::arg("density") = 0.0, py::arg("seed") = 1);
  m.def("read_image", [](const std::string& path) { return to_array(read_image(path)); }, py::arg("path"));
  m.def("write_image", [](const Array& img, const std::string& path, int bit_depth) {
        write_image(to_grid(img, std::nullopt), path, bit_depth);
      }, py::arg("image"), py::arg("path"), py::arg("bit_depth") = 8);
  m.def("psnr", [](const Array& u, const Array& ref) {
        return psnr(to_grid(u, std::nullopt), to_grid(ref, std::nullopt));
      }, py::arg("u"), py::arg("reference"));

  m.def("denoise", [](const Array& f, std::vector<double> lambda, NoiseModel model, const SolverConfig& cfg) {
        const ImageGrid fg = to_grid(f, std::nullopt);
        StateSolution s;
        {
          py::gil_scoped_release release;
          s = solve_state(model, fg, lambda, cfg);
        }
        return py::make_tuple(to_array(s.u), trace_dict(s.trace));
      }, py::arg("f"), py::arg("lambda_"), py::arg("model") = NoiseModel::Gaussian,
      py::arg("solver") = SolverConfig{});

  m.def("reduced_cost", [](std::vector<double> lambda, const Array& f, const Array& u_o, NoiseModel model,
                           const SolverConfig& cfg, double beta) {
        return reduced_cost(lambda, to_grid(f, std::nullopt), to_grid(u_o, std::nullopt), model, cfg, beta).first;
      }, py::arg("lambda_"), py::arg("f"), py::arg("u_o"), py::arg("model") = NoiseModel::Gaussian,
      py::arg("solver") = SolverConfig{}, py::arg("beta") = 1e-10);

  m.def("adjoint_gradient", [](std::vector<double> lambda, const Array& f, const Array& u_o, NoiseModel model,
                               const SolverConfig& cfg, double beta) {
        const ImageGrid fg = to_grid(f, std::nullopt), og = to_grid(u_o, std::nullopt);
        const StateSolution s = solve_state(model, fg, lambda, cfg);
        return adjoint_gradient(model, fg, og, s.u, lambda, beta, cfg).grad_f;
      }, py::arg("lambda_"), py::arg("f"), py::arg("u_o"), py::arg("model") = NoiseModel::Gaussian,
      py::arg("solver") = SolverConfig{}, py::arg("beta") = 1e-10);

  m.def("default_lambda0", [](NoiseModel model, const Array& f) { return default_lambda0(model, to_grid(f, std::nullopt)); },
        py::arg("model"), py::arg("f"));

  m.def("learn", [](const Array& f, const Array& u_o, NoiseModel model, const SolverConfig& solver,
                    const BilevelConfig& cfg) {
        const ImageGrid fg = to_grid(f, std::nullopt), og = to_grid(u_o, std::nullopt);
        BilevelResult r;
        {
          py::gil_scoped_release release;
          r = projected_bfgs(fg, og, model, solver, cfg);
        }
        return result_dict(r);
      }, py::arg("f"), py::arg("u_o"), py::arg("model") = NoiseModel::Gaussian,
      py::arg("solver") = SolverConfig{}, py::arg("config") = BilevelConfig{});

  m.def("train", [](const std::vector<std::pair<Array, Array>>& pairs, NoiseModel model,
                    const SolverConfig& solver, const BilevelConfig& cfg) {
        LearningProblem problem{model, {}, solver};
        for (const auto& [f, u] : pairs) problem.pairs.push_back({to_grid(f, std::nullopt), to_grid(u, std::nullopt)});
        BilevelResult r;
        {
          py::gil_scoped_release release;
          r = train_on_set(problem, cfg);
        }
        return result_dict(r);
      }, py::arg("pairs"), py::arg("model") = NoiseModel::Gaussian, py::arg("solver") = SolverConfig{},
      py::arg("config") = BilevelConfig{});
}
