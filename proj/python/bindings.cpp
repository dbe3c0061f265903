#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "treepot/acceptance.hpp"
#include "treepot/boundary_measure.hpp"
#include "treepot/boundary_process.hpp"
#include "treepot/chain_sim.hpp"
#include "treepot/error.hpp"
#include "treepot/martin_harmonic.hpp"
#include "treepot/spec_io.hpp"
#include "treepot/tree_matrix.hpp"
#include "treepot/ultrametric.hpp"

namespace py = pybind11;
using namespace treepot;

namespace {

RootMode mode_or_spec(const LoadedSpec& s, const std::string& mode) {
  return mode.empty() ? s.mode : parse_root_mode(mode);
}

KernelRoute parse_route(const std::string& r) {
  if (r == "ratio") return KernelRoute::ratio;
  if (r == "series") return KernelRoute::series;
  if (r == "irregular") return KernelRoute::irregular;
  throw Error("bad_argument", "python", "unknown route", {{"route", r}});
}

LoadedSpec spec_from(const std::string& path) { return load_spec(resolve_input(path)); }

ExitMeasure measure_from(const LoadedSpec& s, int resolution, const std::string& mode, double tol) {
  return exit_measure(s.tree, s.weights, resolution, default_schedule(), tol, mode_or_spec(s, mode));
}

py::dict verify_inverse(const std::string& spec, int depth) {
  auto s = spec_from(spec);
  RootedTree tree(s.tree);
  auto nodes = window_nodes(tree, depth);
  py::dict d;
  d["residual"] = inverse_residual(tree, *s.weights, nodes);
  d["nodes"] = nodes.size();
  return d;
}

py::dict finite_potential_py(const std::string& spec, int n) {
  auto s = spec_from(spec);
  RootedTree tree(s.tree);
  auto V = finite_potential(tree, *s.weights, n);
  auto O = finite_potential_dense(tree, *s.weights, n);
  std::vector<std::string> names;
  for (auto id : V.rows) names.push_back(tree.name(id));
  py::dict d;
  d["nodes"] = names;
  d["V"] = V.m;
  d["dense"] = O.m;
  return d;
}

py::dict classify(const std::string& spec, double tol) {
  auto s = spec_from(spec);
  auto c = classify_transience(s.tree, s.weights, default_schedule(), tol);
  py::dict d;
  d["status"] = to_string(c.status);
  d["evidence"] = c.evidence;
  d["absorption_root"] = py::make_tuple(c.g_root.lower, c.g_root.upper);
  return d;
}

py::dict ray_report(const std::string& spec, const std::string& ray, int depth, double tol) {
  auto s = spec_from(spec);
  auto r = ray_regularity(s.tree, s.weights, ray.empty() ? s.ray : parse_path(ray), depth, tol);
  py::dict d;
  d["status"] = to_string(r.status);
  d["accessible"] = r.accessible;
  return d;
}

std::map<std::string, double> exit_masses(const std::string& spec, int resolution, const std::string& mode,
                                          double tol) {
  auto mu = measure_from(spec_from(spec), resolution, mode, tol);
  std::map<std::string, double> out;
  for (auto& a : mu.atoms(resolution)) out[path_string(a)] = mu.mass(a);
  return out;
}

double martin(const std::string& spec, const std::string& node, const std::string& ray, const std::string& route,
              const std::string& mode, double tol) {
  auto s = spec_from(spec);
  const Path r = ray.empty() ? s.ray : parse_path(ray);
  auto mu = measure_from(s, static_cast<int>(r.size()), mode, tol);
  return martin_kernel(mu, parse_path(node), r, parse_route(route)).value;
}

double kernel(const std::string& spec, double t, const std::string& xi, const std::string& eta, int resolution,
              const std::string& mode, double tol) {
  auto s = spec_from(spec);
  BoundaryKernel bk(measure_from(s, resolution, mode, tol));
  return kernel_p(bk, t, parse_path(xi), parse_path(eta));
}

py::dict simulate(const std::string& spec, int resolution, std::uint64_t paths, std::uint64_t seed,
                  const std::string& start, const std::string& mode, double horizon) {
  auto s = spec_from(spec);
  BoundaryKernel bk(measure_from(s, resolution + 1, mode, 1e-12));
  const Path st = parse_path(start);
  const bool reflected = bk.mode() == RootMode::reflected;
  std::vector<double> end, exit1;
  std::vector<std::uint64_t> renewals;
  std::vector<bool> killed;
  {
    py::gil_scoped_release release;
    for (std::uint64_t k = 0; k < paths; ++k) {
      auto p = reflected ? simulate_boundary_reflected(bk, st, resolution, horizon, seed, k)
                         : simulate_boundary(bk, st, resolution, horizon, seed, k);
      end.push_back(p.end_time);
      exit1.push_back(p.exit_time(1));
      renewals.push_back(p.renewals);
      killed.push_back(p.status == BoundaryPath::Status::killed);
    }
  }
  py::dict d;
  d["end_time"] = end;
  d["exit_time_level1"] = exit1;
  d["renewals"] = renewals;
  d["killed"] = killed;
  d["G0"] = bk.G(st, 0);
  return d;
}

py::dict ultra_generator(const Eigen::MatrixXd& U) {
  auto ext = minimal_tree_extension(U);
  auto g = ultrametric_generator(ext, U);
  py::dict d;
  d["Q"] = g.Q;
  d["inverse_residual"] = g.inverse_residual;
  d["asymmetry"] = g.asymmetry;
  d["oracle_diff"] = g.oracle_diff;
  d["support_ok"] = g.support_ok;
  d["certified"] = g.certified;
  return d;
}

py::dict ultra_embed(const Eigen::MatrixXd& U) {
  auto ext = minimal_tree_extension(U);
  py::dict d;
  d["parent"] = ext.parent;
  d["level"] = ext.level;
  d["value"] = ext.value;
  d["member"] = ext.member;
  d["embed"] = ext.embed;
  d["full_matrix"] = ext.full_matrix();
  d["restricted"] = ext.restricted();
  return d;
}

py::dict criterion(int id, std::uint64_t seed, std::uint64_t paths) {
  AcceptanceOptions opt;
  opt.seed = seed;
  opt.paths = paths;
  CriterionResult r;
  {
    py::gil_scoped_release release;
    r = run_criterion(id, opt);
  }
  py::dict d;
  d["id"] = r.id;
  d["name"] = r.name;
  d["passed"] = r.pass;
  d["detail"] = r.detail;
  d["seconds"] = r.seconds;
  py::dict m;
  for (auto& [k, v] : r.metrics) m[py::str(k)] = v;
  d["metrics"] = m;
  return d;
}

}  // namespace

PYBIND11_MODULE(_treepot, m) {
  m.doc() = "Potential theory of tree and ultrametric matrices";

  static py::exception<Error> exc(m, "TreepotError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::dict ctx;
      for (auto& [k, v] : e.context()) ctx[py::str(k)] = v;
      py::tuple args = py::make_tuple(py::str(e.what()));
      PyObject* value = PyObject_CallObject(exc.ptr(), args.ptr());
      py::object obj = py::reinterpret_steal<py::object>(value);
      obj.attr("code") = e.code();
      obj.attr("module") = e.module();
      obj.attr("context") = ctx;
      PyErr_SetObject(exc.ptr(), obj.ptr());
    }
  });

  m.def("fixtures_dir", &fixtures_dir);
  m.def("verify_inverse", &verify_inverse, py::arg("spec"), py::arg("depth"));
  m.def("finite_potential", &finite_potential_py, py::arg("spec"), py::arg("level"));
  m.def("classify", &classify, py::arg("spec"), py::arg("tol") = 1e-10);
  m.def("ray_regularity", &ray_report, py::arg("spec"), py::arg("ray") = "", py::arg("depth") = 40,
        py::arg("tol") = 1e-6);
  m.def("exit_measure", &exit_masses, py::arg("spec"), py::arg("resolution"), py::arg("mode") = "",
        py::arg("tol") = 1e-12);
  m.def("martin_kernel", &martin, py::arg("spec"), py::arg("node"), py::arg("ray") = "",
        py::arg("route") = "ratio", py::arg("mode") = "", py::arg("tol") = 1e-12);
  m.def("kernel_p", &kernel, py::arg("spec"), py::arg("t"), py::arg("xi"), py::arg("eta"),
        py::arg("resolution") = 4, py::arg("mode") = "", py::arg("tol") = 1e-12);
  m.def("simulate_boundary", &simulate, py::arg("spec"), py::arg("resolution"), py::arg("paths"), py::arg("seed"),
        py::arg("start") = "", py::arg("mode") = "", py::arg("horizon") = std::numeric_limits<double>::infinity());
  m.def("ultrametric_generator", &ultra_generator, py::arg("U"));
  m.def("minimal_tree_extension", &ultra_embed, py::arg("U"));
  m.def("is_ultrametric", [](const Eigen::MatrixXd& U) { return verify_ultrametric(U).ok; }, py::arg("U"));
  m.def("run_criterion", &criterion, py::arg("id"), py::arg("seed") = AcceptanceOptions{}.seed,
        py::arg("paths") = AcceptanceOptions{}.paths);
  m.attr("NUM_CRITERIA") = kNumCriteria;
}
