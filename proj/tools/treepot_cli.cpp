// treepot: command-line front end.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treepot/acceptance.hpp"
#include "treepot/boundary_measure.hpp"
#include "treepot/boundary_process.hpp"
#include "treepot/chain_sim.hpp"
#include "treepot/error.hpp"
#include "treepot/martin_harmonic.hpp"
#include "treepot/spec_io.hpp"
#include "treepot/tree_matrix.hpp"
#include "treepot/ultrametric.hpp"

using nlohmann::json;
using namespace treepot;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInput = 3,
  kHypothesis = 4,
  kUncertified = 5,
  kCheckFailed = 6,
};

int exit_code_for(const std::string& code) {
  static const std::map<std::string, int> table{
      {"usage", kUsage},           {"bad_argument", kUsage},        {"schema", kInput},
      {"malformed_spec", kInput},  {"bad_weights", kInput},         {"bad_matrix", kInput},
      {"bad_path", kInput},        {"bad_spec", kInput},            {"io", kInput},
      {"hypothesis", kHypothesis}, {"not_ultrametric", kHypothesis}, {"asymmetric", kHypothesis},
      {"recurrent", kHypothesis},  {"not_harmonic", kHypothesis},   {"singular", kHypothesis},
      {"zero_mass", kHypothesis},  {"diagonal_at_infinity", kHypothesis},
      {"uncertified", kUncertified}, {"depth_cap", kUncertified},   {"resolution", kUncertified},
      {"unrealized_node", kUncertified}, {"certification_failed", kCheckFailed},
  };
  auto it = table.find(code);
  return it == table.end() ? kInternal : it->second;
}

json error_json(const std::string& code, const std::string& module, const std::string& message,
                const std::map<std::string, std::string>& context = {}) {
  json ctx = json::object();
  for (auto& [k, v] : context) ctx[k] = v;
  return {{"code", code}, {"module", module}, {"message", message}, {"context", ctx}};
}

struct RunConfig {
  std::string spec;
  std::string matrix;
  std::optional<int> depth;
  std::optional<int> resolution;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::uint64_t paths = 0;
  std::string mode;
  std::string out;
  std::string format = "json";
  std::string ray;
  std::vector<std::string> nodes;
  std::vector<double> times;
  std::string route = "all";
  std::string start;
  std::string trace;
  double horizon = 0.0;
  double ray_tol = 1e-6;
  bool reflected = false;
  bool check = false;
  unsigned threads = 0;
};

// Output of one subcommand: a JSON document and the equivalent table for CSV.
struct Result {
  json doc = json::object();
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> trailer;  // extra lines after the CSV table
  std::string fail_code;             // empty when every certification passed
  std::string fail_module = "cli";
  std::string fail_message;
  std::map<std::string, std::string> fail_context;

  void row(std::vector<std::string> r) { rows.push_back(std::move(r)); }
  void fail(const std::string& code, const std::string& module, const std::string& message,
            std::map<std::string, std::string> ctx = {}) {
    if (!fail_code.empty()) return;
    fail_code = code;
    fail_module = module;
    fail_message = message;
    fail_context = std::move(ctx);
  }
};

std::string num(double v) { return format_double(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

json bracket_json(const ProbBracket& b) {
  return {{"lower", b.lower}, {"upper", b.upper}, {"depth", b.depth}, {"converged", b.converged}};
}
json interval_json(const Interval& i) { return {{"lower", i.lo}, {"upper", i.hi}}; }

LoadedSpec require_spec(const RunConfig& c) {
  if (c.spec.empty()) throw Error("usage", "cli", "--spec is required");
  return load_spec(resolve_input(c.spec));
}

Eigen::MatrixXd require_matrix(const RunConfig& c) {
  if (c.matrix.empty()) throw Error("usage", "cli", "--matrix is required");
  return load_matrix_csv(resolve_input(c.matrix));
}

RootMode mode_of(const RunConfig& c, const LoadedSpec& s) {
  if (c.reflected) return RootMode::reflected;
  return c.mode.empty() ? s.mode : parse_root_mode(c.mode);
}

Path ray_of(const RunConfig& c, const LoadedSpec& s) { return c.ray.empty() ? s.ray : parse_path(c.ray); }

std::uint64_t require_seed(const RunConfig& c) {
  if (!c.seed) throw Error("usage", "cli", "--seed is required for stochastic subcommands");
  return *c.seed;
}

unsigned worker_count(const RunConfig& c, std::uint64_t jobs) {
  unsigned n = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::uint64_t>(n, std::max<std::uint64_t>(1, jobs)));
}

// runs fn(k) for k < n on a worker pool; the first exception is rethrown
template <class F>
void parallel_for(std::uint64_t n, unsigned workers, F fn) {
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto body = [&] {
    for (std::uint64_t k; (k = next.fetch_add(1)) < n;) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::string> node_names(RootedTree& tree, const std::vector<NodeId>& ids) {
  std::vector<std::string> out;
  for (NodeId id : ids) out.push_back(tree.name(id));
  return out;
}

void matrix_rows(Result& r, RootedTree& tree, const NodeMatrix& m) {
  r.header = {"i", "j", "value"};
  auto rn = node_names(tree, m.rows), cn = node_names(tree, m.cols);
  for (Eigen::Index a = 0; a < m.m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.m.cols(); ++b) r.row({rn[a], cn[b], num(m.m(a, b))});
}

int default_depth(const RunConfig& c, const LoadedSpec& s, int infinite_default) {
  if (c.depth) return *c.depth;
  return s.tree->is_finite() ? s.tree->depth() : infinite_default;
}

// ---- tree ----

Result tree_verify_inverse(const RunConfig& c) {
  auto s = require_spec(c);
  RootedTree tree(s.tree);
  const int depth = default_depth(c, s, 4);
  const double tol = c.tol.value_or(1e-10);
  auto nodes = window_nodes(tree, depth);
  const double res = inverse_residual(tree, *s.weights, nodes);
  Result r;
  r.doc = {{"command", "tree verify-inverse"}, {"label", s.label}, {"depth", depth}, {"nodes", nodes.size()},
           {"residual", res}, {"tol", tol}, {"certified", res <= tol}};
  r.header = {"metric", "value"};
  r.row({"depth", std::to_string(depth)});
  r.row({"nodes", std::to_string(nodes.size())});
  r.row({"residual", num(res)});
  if (res > tol) r.fail("certification_failed", "tree_matrix", "(-Q)U - I exceeds the tolerance", {{"residual", num(res)}});
  return r;
}

Result tree_potential(const RunConfig& c) {
  auto s = require_spec(c);
  RootedTree tree(s.tree);
  const int n = default_depth(c, s, 2);
  const double tol = c.tol.value_or(1e-10);
  auto V = finite_potential(tree, *s.weights, n);
  Result r;
  r.doc = {{"command", "tree potential"}, {"label", s.label}, {"level", n}, {"nodes", node_names(tree, V.rows)},
           {"V", matrix_json(V.m)}};
  if (V.rows.size() <= 2000) {
    auto O = finite_potential_dense(tree, *s.weights, n);
    const double diff = (V.m - O.m).cwiseAbs().maxCoeff();
    r.doc["dense_oracle_diff"] = diff;
    if (diff > tol)
      r.fail("certification_failed", "tree_matrix", "elimination and dense inverse disagree", {{"diff", num(diff)}});
  }
  matrix_rows(r, tree, V);
  return r;
}

Result tree_harmonic_decomp(const RunConfig& c) {
  auto s = require_spec(c);
  RootedTree tree(s.tree);
  const int n = c.depth.value_or(1);
  const double tol = c.tol.value_or(1e-10);
  auto hd = harmonic_decomposition(tree, *s.weights, n);
  auto hm = hitting_matrices(tree, *s.weights, n);
  Result r;
  const bool rank_ok = hd.rank == static_cast<int>(hd.boundary.size());
  r.doc = {{"command", "tree harmonic-decomp"},
           {"label", s.label},
           {"level", n},
           {"rank", hd.rank},
           {"boundary", node_names(tree, hd.boundary)},
           {"harmonic_residual", hd.harmonic_residual},
           {"reconstruction_residual", hm.reconstruction_residual},
           {"rows", node_names(tree, hd.H.rows)},
           {"H", matrix_json(hd.H.m)},
           {"certified", rank_ok && hd.harmonic_residual <= tol && hm.reconstruction_residual <= tol}};
  matrix_rows(r, tree, hd.H);
  if (!rank_ok)
    r.fail("certification_failed", "tree_matrix", "rank of U - V differs from the boundary size",
           {{"rank", std::to_string(hd.rank)}, {"boundary", std::to_string(hd.boundary.size())}});
  else if (hd.harmonic_residual > tol || hm.reconstruction_residual > tol)
    r.fail("certification_failed", "tree_matrix", "harmonic decomposition residual exceeds the tolerance");
  return r;
}

// ---- chain ----

Result chain_classify(const RunConfig& c) {
  auto s = require_spec(c);
  const double tol = c.tol.value_or(1e-10);
  auto cl = classify_transience(s.tree, s.weights, default_schedule(), tol);
  Result r;
  r.doc = {{"command", "chain classify"},
           {"label", s.label},
           {"status", to_string(cl.status)},
           {"evidence", cl.evidence},
           {"absorption_root", bracket_json(cl.g_root)}};
  r.header = {"metric", "value"};
  r.row({"status", to_string(cl.status)});
  r.row({"absorption_root_lower", num(cl.g_root.lower)});
  r.row({"absorption_root_upper", num(cl.g_root.upper)});
  const Path ray = ray_of(c, s);
  if (!ray.empty() && cl.status == Classification::Status::transient) {
    const int depth = c.depth.value_or(40);
    auto rr = ray_regularity(s.tree, s.weights, ray, depth, c.ray_tol);
    json ab = json::array(), ms = json::array();
    for (auto& i : rr.absorption) ab.push_back(interval_json(i));
    for (auto& i : rr.mass) ms.push_back(interval_json(i));
    std::string verdict = to_string(rr.status);
    if (rr.status == RayReport::Status::irregular) verdict += rr.accessible ? " but accessible" : " and inaccessible";
    r.doc["ray"] = {{"ray", path_string(ray)}, {"status", to_string(rr.status)}, {"accessible", rr.accessible},
                    {"verdict", verdict}, {"depth", rr.depth}, {"absorption", ab}, {"mass", ms}};
    r.row({"ray_status", to_string(rr.status)});
    r.row({"ray_accessible", rr.accessible ? "true" : "false"});
  }
  if (cl.status == Classification::Status::undetermined)
    r.fail("uncertified", "chain_sim", "transience could not be certified", {{"evidence", cl.evidence}});
  return r;
}

Result chain_simulate(const RunConfig& c) {
  auto s = require_spec(c);
  const std::uint64_t seed = require_seed(c);
  const std::uint64_t paths = c.paths ? c.paths : 1000;
  const RootMode mode = mode_of(c, s);
  const int resolution = c.resolution.value_or(2);
  const Path start = parse_path(c.start);
  ChainCaps caps;
  caps.max_level = c.depth.value_or(64);
  caps.max_time = c.horizon;
  caps.keep_steps = !c.trace.empty();
  if (resolution > caps.max_level) throw Error("bad_argument", "cli", "--resolution exceeds the level cap");

  std::vector<Trajectory> tr(paths);
  parallel_for(paths, worker_count(c, paths), [&](std::uint64_t k) {
    tr[k] = simulate_chain(*s.tree, *s.weights, mode, start, seed, k, caps);
    if (!caps.keep_steps) tr[k].nodes.clear(), tr[k].holding.clear();
  });

  std::map<std::string, std::uint64_t> status;
  std::map<Path, std::uint64_t> cyl;
  double t_abs = 0.0, steps = 0.0;
  std::uint64_t escaped = 0, absorbed = 0;
  for (auto& t : tr) {
    ++status[to_string(t.status)];
    steps += static_cast<double>(t.steps);
    if (t.status == Trajectory::Status::escaped) {
      ++escaped;
      ++cyl[Path(t.final_node.begin(), t.final_node.begin() + resolution)];
    } else if (t.status == Trajectory::Status::absorbed) {
      ++absorbed;
      t_abs += t.total_time;
    }
  }
  Result r;
  json counts = json::object();
  for (auto& [k, v] : status) counts[k] = v;
  r.doc = {{"command", "chain simulate"}, {"label", s.label}, {"mode", to_string(mode)}, {"seed", seed},
           {"paths", paths}, {"start", path_string(start)}, {"status_counts", counts},
           {"mean_steps", steps / static_cast<double>(paths)}};
  if (absorbed) r.doc["mean_absorption_time"] = t_abs / static_cast<double>(absorbed);

  // exit-law masses as the reference for escaped paths started at the root
  std::optional<ExitMeasure> mu;
  if (start.empty() && escaped) {
    try {
      mu = exit_measure(s.tree, s.weights, resolution, default_schedule(), 1e-10, mode);
    } catch (const Error&) {
    }
  }
  r.header = {"cylinder", "count", "frequency", "exit_mass"};
  json cj = json::array();
  for (auto& [p, n] : cyl) {
    const double f = static_cast<double>(n) / static_cast<double>(escaped);
    json e = {{"cylinder", path_string(p)}, {"count", n}, {"frequency", f}};
    std::string m = "";
    if (mu) {
      e["exit_mass"] = mu->mass(p);
      m = num(mu->mass(p));
    }
    cj.push_back(e);
    r.row({path_string(p), num(n), num(f), m});
  }
  r.doc["cylinders"] = cj;
  if (!c.trace.empty()) {
    std::ofstream f(c.trace);
    if (!f) throw Error("io", "cli", "cannot write trace file", {{"path", c.trace}});
    f << "path,step,node,holding\n";
    for (std::uint64_t k = 0; k < paths; ++k)
      for (std::size_t q = 0; q < tr[k].nodes.size(); ++q)
        f << k << ',' << q << ',' << path_string(tr[k].nodes[q]) << ','
          << (q < tr[k].holding.size() ? num(tr[k].holding[q]) : "") << '\n';
  }
  return r;
}

// ---- boundary ----

ExitMeasure measure_for(const RunConfig& c, const LoadedSpec& s, int resolution) {
  return exit_measure(s.tree, s.weights, resolution, default_schedule(), c.tol.value_or(1e-12), mode_of(c, s));
}

Result boundary_exit_measure(const RunConfig& c) {
  auto s = require_spec(c);
  const int res = c.resolution.value_or(4);
  auto mu = measure_for(c, s, res);
  Result r;
  json atoms = json::array();
  r.header = {"cylinder", "mass", "lower", "upper"};
  for (auto& a : mu.atoms(res)) {
    auto iv = mu.mass_interval(a);
    atoms.push_back({{"cylinder", path_string(a)}, {"mass", iv.mid()}, {"lower", iv.lo}, {"upper", iv.hi}});
    r.row({path_string(a), num(iv.mid()), num(iv.lo), num(iv.hi)});
  }
  auto norm = mu.normalization();
  r.doc = {{"command", "boundary exit-measure"}, {"label", s.label},         {"mode", to_string(mu.mode())},
           {"resolution", res},                   {"depth", mu.analysis().depth()}, {"converged", mu.converged()},
           {"escape_probability", interval_json(norm)}, {"atoms", atoms}};
  if (!mu.converged())
    r.fail("uncertified", "boundary_measure", "exit-law brackets did not reach the tolerance",
           {{"depth", std::to_string(mu.analysis().depth())}});
  return r;
}

Result boundary_kernel(const RunConfig& c) {
  auto s = require_spec(c);
  const int res = c.resolution.value_or(3);
  const double tol = c.tol.value_or(1e-10);
  BoundaryKernel bk(measure_for(c, s, std::max(res, 2)));
  const std::vector<double> times = c.times.empty() ? std::vector<double>{1.0} : c.times;
  auto atoms = bk.measure().atoms(res);
  Result r;
  r.header = {"xi", "eta", "t", "p"};
  json pairs = json::array();
  double worst_green = 0.0;
  const bool absorbed = bk.mode() == RootMode::absorbed;
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::size_t b = 0; b < atoms.size(); ++b) {
      if (a == b) continue;
      json e = {{"xi", path_string(atoms[a])}, {"eta", path_string(atoms[b])}};
      json ps = json::array();
      for (double t : times) {
        const double p = kernel_p(bk, t, atoms[a], atoms[b]);
        ps.push_back({{"t", t}, {"p", p}});
        r.row({path_string(atoms[a]), path_string(atoms[b]), num(t), num(p)});
      }
      e["p"] = ps;
      if (absorbed && a < b) {
        const double g = green_integral(bk, atoms[a], atoms[b]);
        const double res_g = green_identity_residual(bk, atoms[a], atoms[b]);
        e["green"] = g;
        e["green_residual"] = res_g;
        worst_green = std::max(worst_green, res_g);
      }
      pairs.push_back(e);
    }
  json mass = json::array();
  for (double t : times) {
    auto p1 = semigroup_apply(bk, t, SimpleFn::constant(bk.measure(), 1, 1.0));
    double v = 0.0;
    for (auto& [atom, x] : p1.values) v = std::max(v, x);
    mass.push_back({{"t", t}, {"P_t1", v}, {"expected", std::exp(-t * bk.inv_G({}, 0))}});
  }
  r.doc = {{"command", "boundary kernel"}, {"label", s.label}, {"mode", to_string(bk.mode())},
           {"resolution", res},            {"pairs", pairs},   {"total_mass", mass}};
  if (absorbed) {
    r.doc["max_green_residual"] = worst_green;
    if (worst_green > tol)
      r.fail("certification_failed", "boundary_process", "Green identity residual exceeds the tolerance",
             {{"residual", num(worst_green)}});
  }
  return r;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Result boundary_simulate(const RunConfig& c) {
  auto s = require_spec(c);
  const std::uint64_t seed = require_seed(c);
  const std::uint64_t paths = c.paths ? c.paths : 10000;
  const int res = c.resolution.value_or(4);
  const RootMode mode = mode_of(c, s);
  const bool reflected = mode == RootMode::reflected;
  const double horizon = c.horizon > 0.0 ? c.horizon : (reflected ? 10.0 : kInf);
  BoundaryKernel bk(exit_measure(s.tree, s.weights, res + 1, default_schedule(), c.tol.value_or(1e-12), mode));
  Path start = c.start.empty() ? ray_of(c, s) : parse_path(c.start);
  if (static_cast<int>(start.size()) > res) start.resize(res);

  std::vector<BoundaryPath> bp(paths);
  parallel_for(paths, worker_count(c, paths), [&](std::uint64_t k) {
    bp[k] = reflected ? simulate_boundary_reflected(bk, start, res, horizon, seed, k)
                      : simulate_boundary(bk, start, res, horizon, seed, k);
  });

  std::vector<double> life, exit1;
  std::uint64_t killed = 0;
  double renewals = 0.0;
  for (auto& p : bp) {
    renewals += static_cast<double>(p.renewals);
    if (p.status == BoundaryPath::Status::killed) {
      ++killed;
      life.push_back(p.end_time);
    }
    const double e = p.exit_time(1);
    if (std::isfinite(e)) exit1.push_back(e);
  }
  const double n = static_cast<double>(paths);
  Result r;
  r.doc = {{"command", "boundary simulate"}, {"label", s.label}, {"mode", to_string(mode)}, {"seed", seed},
           {"paths", paths}, {"resolution", res}, {"start", path_string(start)},
           {"horizon", std::isinf(horizon) ? json("inf") : json(horizon)}, {"killed", killed}};
  r.header = {"metric", "value"};
  r.row({"paths", num(paths)});
  r.row({"killed", num(killed)});
  const double crit = ks_critical(paths, 0.01);
  // the start ray's level-1 cylinder is only fixed when the start resolves it
  const bool fixed_start = !start.empty();
  if (!reflected) {
    const double g0 = bk.G(start, 0);
    const double m = mean_of(life);
    json lj = {{"mean", m}, {"expected_mean", g0}, {"z", (m - g0) / (g0 / std::sqrt(std::max(1.0, n)))}};
    if (std::isinf(horizon) && killed == paths) {
      const double ks = ks_statistic(life, [&](double x) { return 1.0 - std::exp(-x / g0); });
      lj["ks"] = ks;
      lj["ks_critical_1pct"] = crit;
      r.row({"lifetime_ks", num(ks)});
    }
    r.doc["lifetime"] = lj;
    r.row({"lifetime_mean", num(m)});
    r.row({"lifetime_expected", num(g0)});
  } else {
    const double g1 = bk.G(start.empty() ? Path{0} : start, 1);
    r.doc["renewals"] = {{"mean", renewals / n}, {"expected_mean", horizon / g1}};
    r.row({"renewals_mean", num(renewals / n)});
    r.row({"renewals_expected", num(horizon / g1)});
  }
  if (fixed_start && exit1.size() == paths) {
    const double b1 = exit_rate(bk, 1, start);
    const double ks = ks_statistic(exit1, [&](double x) { return 1.0 - std::exp(-b1 * x); });
    r.doc["exit_time_level1"] = {{"mean", mean_of(exit1)}, {"expected_mean", 1.0 / b1}, {"ks", ks},
                                 {"ks_critical_1pct", crit}};
    r.row({"exit1_mean", num(mean_of(exit1))});
    r.row({"exit1_expected", num(1.0 / b1)});
    r.row({"exit1_ks", num(ks)});
  }
  if (!c.trace.empty()) {
    std::ofstream f(c.trace);
    if (!f) throw Error("io", "cli", "cannot write trace file", {{"path", c.trace}});
    f << "path,time,ray\n";
    for (std::uint64_t k = 0; k < paths; ++k) {
      for (std::size_t q = 0; q < bp[k].times.size(); ++q)
        f << k << ',' << num(bp[k].times[q]) << ',' << path_string(bp[k].rays[q]) << '\n';
      if (bp[k].status == BoundaryPath::Status::killed) f << k << ',' << num(bp[k].end_time) << ",killed\n";
    }
  }
  return r;
}

// ---- martin ----

Result martin_kernel_cmd(const RunConfig& c) {
  auto s = require_spec(c);
  const RootMode mode = mode_of(c, s);
  const Path ray = ray_of(c, s);
  if (ray.empty()) throw Error("usage", "cli", "--ray is required (or a ray in the spec)");
  const int res = c.resolution.value_or(static_cast<int>(ray.size()));
  std::vector<Path> nodes;
  for (auto& n : c.nodes) nodes.push_back(parse_path(n));
  if (nodes.empty()) {
    const int top = std::min(3, static_cast<int>(ray.size()) - 1);
    for (int l = 0; l <= top; ++l)
      for (auto& tp : enumerate_level(*s.tree, l, 4096)) nodes.push_back(tp.path);
  }
  Result r;
  r.header = {"node", "route", "value", "error", "flagged"};
  json values = json::array();
  auto cl = classify_transience(s.tree, s.weights, default_schedule(), 1e-10);
  double gap = 0.0;
  auto add = [&](const Path& i, const MartinValue& v) {
    values.push_back({{"node", path_string(i)}, {"route", to_string(v.route)}, {"value", v.value},
                      {"error", v.error}, {"flagged", v.flagged}});
    r.row({path_string(i), to_string(v.route), num(v.value), num(v.error), v.flagged ? "true" : "false"});
  };
  if (cl.status == Classification::Status::recurrent) {
    for (auto& i : nodes) add(i, martin_kernel_recurrent(*s.weights, i, ray));
  } else {
    auto mu = exit_measure(s.tree, s.weights, res, default_schedule(), c.tol.value_or(1e-12), mode);
    std::vector<KernelRoute> routes;
    if (c.route == "all") {
      routes = {KernelRoute::ratio, KernelRoute::series};
      if (mode == RootMode::absorbed) routes.push_back(KernelRoute::irregular);
    } else if (c.route == "ratio") {
      routes = {KernelRoute::ratio};
    } else if (c.route == "series") {
      routes = {KernelRoute::series};
    } else if (c.route == "irregular") {
      routes = {KernelRoute::irregular};
    } else {
      throw Error("usage", "cli", "unknown route", {{"route", c.route}});
    }
    for (auto& i : nodes) {
      std::optional<double> first;
      for (auto rt : routes) {
        auto v = martin_kernel(mu, i, ray, rt);
        add(i, v);
        if (rt == KernelRoute::irregular) continue;
        if (first) gap = std::max(gap, std::abs(*first - v.value));
        else first = v.value;
      }
    }
  }
  r.doc = {{"command", "martin kernel"}, {"label", s.label}, {"mode", to_string(mode)},
           {"ray", path_string(ray)},    {"chain", to_string(cl.status)}, {"values", values},
           {"max_route_gap", gap}};
  if (gap > 1e-6)
    r.fail("certification_failed", "martin_harmonic", "kernel routes disagree", {{"gap", num(gap)}});
  return r;
}

// ---- ultra ----

Result ultra_check(const RunConfig& c) {
  Result r;
  r.header = {"metric", "value"};
  if (!c.spec.empty()) {
    auto s = require_spec(c);
    if (!s.words) throw Error("schema", "cli", "ultra check --spec needs a word-family spec");
    const int res = c.resolution.value_or(2);
    auto b = u_boundary(*s.words, res, {8, 16, 32, 64}, c.tol.value_or(1e-6));
    json ifm = json::array(), cyl = json::array();
    for (auto& [d, m] : b.i_free_mass) ifm.push_back({{"depth", d}, {"mass", m}});
    for (auto& cy : b.cylinders)
      cyl.push_back({{"cylinder", path_string(cy.prefix)}, {"mass", cy.mass}, {"i_free", cy.i_free}});
    r.doc = {{"command", "ultra check"},
             {"label", s.label},
             {"boundary_empty", b.empty_flag},
             {"structural_empty", b.structural_empty},
             {"transience", to_string(b.transience.status)},
             {"h4", {{"status", b.h4.status}, {"upper", b.h4.upper}, {"lower", b.h4.lower}, {"depth", b.h4.depth}}},
             {"resolution", b.resolution},
             {"i_free_mass", ifm},
             {"boundary_mass", b.boundary_mass},
             {"cylinders", cyl},
             {"lemma_consistent", b.lemma_consistent},
             {"note", b.note}};
    r.row({"boundary_empty", b.empty_flag ? "true" : "false"});
    r.row({"boundary_mass", num(b.boundary_mass)});
    r.row({"h4", b.h4.status});
    r.row({"lemma_consistent", b.lemma_consistent ? "true" : "false"});
    return r;
  }
  auto U = require_matrix(c);
  auto chk = verify_ultrametric(U);
  r.doc = {{"command", "ultra check"}, {"size", U.rows()}, {"ultrametric", chk.ok}};
  r.row({"ultrametric", chk.ok ? "true" : "false"});
  if (!chk.ok) {
    r.doc["violation"] = {{"i", chk.i}, {"j", chk.j}, {"k", chk.k}, {"reason", chk.reason}};
    r.fail("not_ultrametric", "ultrametric", "matrix is not an ultrametric arrangement",
           {{"i", std::to_string(chk.i)}, {"j", std::to_string(chk.j)}, {"k", std::to_string(chk.k)},
            {"reason", chk.reason}});
    return r;
  }
  auto h = check_hypotheses(U);
  r.doc["hypotheses"] = {{"h1", h.h1}, {"h2", h.h2}, {"h3", h.h3}, {"h4", h.h4}, {"values", h.values},
                         {"min_gap", h.min_gap}, {"class_counts", h.class_counts}};
  r.row({"h1", h.h1 ? "true" : "false"});
  r.row({"h2", h.h2 ? "true" : "false"});
  r.row({"h3", h.h3 ? "true" : "false"});
  r.row({"h4", h.h4});
  if (!h.h1 || !h.h3)
    r.fail("hypothesis", "ultrametric", "standing hypotheses fail",
           {{"h1", h.h1 ? "true" : "false"}, {"h3", h.h3 ? "true" : "false"}});
  return r;
}

Result ultra_embed(const RunConfig& c) {
  auto U = require_matrix(c);
  auto ext = minimal_tree_extension(U);
  Result r;
  r.header = {"node", "parent", "level", "value", "index", "class"};
  json nodes = json::array();
  for (int k = 0; k < ext.size(); ++k) {
    std::string cls;
    for (int m : ext.cls[k]) cls += (cls.empty() ? "" : ";") + std::to_string(m);
    nodes.push_back({{"node", k}, {"parent", ext.parent[k]}, {"level", ext.level[k]}, {"value", ext.value[k]},
                     {"index", ext.member[k]}, {"class", ext.cls[k]}, {"path", path_string(ext.path(k))}});
    r.row({std::to_string(k), std::to_string(ext.parent[k]), std::to_string(ext.level[k]), num(ext.value[k]),
           std::to_string(ext.member[k]), cls});
  }
  json idx = json::array();
  for (int i = 0; i < ext.num_indices(); ++i)
    idx.push_back({{"index", i}, {"node", ext.embed[i]}, {"neighbors", u_neighbors(ext, i)},
                   {"basin", attraction_basin(ext, i)}});
  const bool roundtrip = (ext.restricted().array() == U.array()).all();
  const bool ultra = verify_ultrametric(ext.full_matrix()).ok;
  r.doc = {{"command", "ultra embed"}, {"size", U.rows()}, {"nodes", nodes}, {"indices", idx},
           {"values", ext.values}, {"roundtrip_exact", roundtrip}, {"extension_ultrametric", ultra}};
  if (!roundtrip || !ultra)
    r.fail("certification_failed", "ultrametric", "tree extension failed its checks",
           {{"roundtrip", roundtrip ? "true" : "false"}, {"ultrametric", ultra ? "true" : "false"}});
  return r;
}

Result ultra_generator_cmd(const RunConfig& c) {
  auto U = require_matrix(c);
  auto ext = minimal_tree_extension(U);
  auto g = ultrametric_generator(ext, U);
  const double tol = c.tol.value_or(1e-10);
  Result r;
  const Eigen::MatrixXd mq = (-g.Q).array() + 0.0;  // no negative zeros
  r.header.clear();
  for (Eigen::Index j = 0; j < mq.cols(); ++j) r.header.push_back("c" + std::to_string(j));
  for (Eigen::Index i = 0; i < mq.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < mq.cols(); ++j) row.push_back(num(mq(i, j)));
    r.row(row);
  }
  r.doc = {{"command", "ultra generator"}, {"minus_Q", matrix_json(mq)}, {"inverse_residual", g.inverse_residual},
           {"asymmetry", g.asymmetry},     {"max_row_sum", g.max_row_sum}, {"oracle_diff", g.oracle_diff},
           {"support_ok", g.support_ok},   {"certified", g.certified}};
  if (!g.warning.empty()) r.doc["warning"] = g.warning;
  if (c.check) {
    const bool ok = g.certified && g.inverse_residual <= tol;
    const std::string line = ok ? "QU=-I certified" : "QU=-I not certified";
    r.doc["check"] = line;
    r.trailer.push_back("# " + line);
    if (!ok)
      r.fail("certification_failed", "ultrametric", "generator failed the inverse check",
             {{"residual", num(g.inverse_residual)}});
  }
  return r;
}

// ---- report ----

Result report_all(const RunConfig& c) {
  AcceptanceOptions opt;
  if (c.seed) opt.seed = *c.seed;
  if (c.paths) opt.paths = c.paths;
  Result r;
  r.header = {"criterion", "name", "pass", "detail"};
  json arr = json::array();
  int failed = 0;
  for (int id = 1; id <= kNumCriteria; ++id) {
    auto cr = run_criterion(id, opt);
    std::fprintf(stderr, "criterion %d %s (%.2fs)\n", id, cr.pass ? "pass" : "FAIL", cr.seconds);
    json m = json::object();
    for (auto& [k, v] : cr.metrics) m[k] = v;
    arr.push_back({{"criterion", id}, {"name", cr.name}, {"pass", cr.pass}, {"detail", cr.detail}, {"metrics", m}});
    r.row({std::to_string(id), cr.name, cr.pass ? "pass" : "fail", cr.detail});
    if (!cr.pass) ++failed;
  }
  r.doc = {{"command", "report all"}, {"seed", opt.seed}, {"paths", opt.paths}, {"criteria", arr},
           {"passed", kNumCriteria - failed}, {"failed", failed}};
  if (failed)
    r.fail("certification_failed", "cli", "acceptance criteria failed", {{"failed", std::to_string(failed)}});
  return r;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char ch : s) o += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return o + "\"";
}

void emit(const Result& r, const RunConfig& c) {
  std::ostringstream os;
  if (c.format == "csv") {
    auto line = [&](const std::vector<std::string>& v) {
      for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << csv_field(v[k]);
      os << '\n';
    };
    line(r.header);
    for (auto& row : r.rows) line(row);
    for (auto& t : r.trailer) os << t << '\n';
  } else {
    os << r.doc.dump(2) << '\n';
  }
  if (c.out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(c.out);
    if (!f) throw Error("io", "cli", "cannot write output file", {{"path", c.out}});
    f << os.str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potential theory of tree and ultrametric matrices"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::function<Result(const RunConfig&)> action;

  auto common = [&](CLI::App* s) {
    s->add_option("--spec", cfg.spec, "tree/weights JSON spec (path or fixture name)");
    s->add_option("--matrix", cfg.matrix, "ultrametric matrix CSV (path or fixture name)");
    s->add_option("--depth", cfg.depth, "truncation depth or level");
    s->add_option("--resolution", cfg.resolution, "boundary cylinder resolution");
    s->add_option("--tol", cfg.tol, "certification tolerance");
    s->add_option("--seed", cfg.seed, "random seed");
    s->add_option("--paths", cfg.paths, "number of Monte Carlo paths");
    s->add_option("--mode", cfg.mode, "root mode")->check(CLI::IsMember({"absorbed", "reflected"}));
    s->add_option("--out", cfg.out, "output file (default stdout)");
    s->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    s->add_option("--threads", cfg.threads, "worker threads for Monte Carlo (default: all cores)");
  };
  auto leaf = [&](CLI::App* group, const std::string& name, const std::string& desc, Result (*fn)(const RunConfig&)) {
    CLI::App* s = group->add_subcommand(name, desc);
    common(s);
    s->callback([&action, fn] { action = fn; });
    return s;
  };

  CLI::App* tree = app.add_subcommand("tree", "finite tree matrices")->require_subcommand(1);
  leaf(tree, "verify-inverse", "check (-Q)U = I on a window", tree_verify_inverse);
  leaf(tree, "potential", "finite potential V on levels <= depth", tree_potential);
  leaf(tree, "harmonic-decomp", "harmonic decomposition at level --depth", tree_harmonic_decomp);

  CLI::App* chain = app.add_subcommand("chain", "the tree chain")->require_subcommand(1);
  auto* csim = leaf(chain, "simulate", "simulate trajectories", chain_simulate);
  csim->add_option("--start", cfg.start, "start node path (default root)");
  csim->add_option("--max-time", cfg.horizon, "time cap per path");
  csim->add_option("--trace", cfg.trace, "write per-step CSV to this file");
  auto* ccls = leaf(chain, "classify", "transience and ray regularity", chain_classify);
  ccls->add_option("--ray", cfg.ray, "ray for the regularity report (default: spec ray)");
  ccls->add_option("--ray-tol", cfg.ray_tol, "tolerance for the regularity report");

  CLI::App* boundary = app.add_subcommand("boundary", "exit law and boundary process")->require_subcommand(1);
  leaf(boundary, "exit-measure", "cylinder masses of the exit law", boundary_exit_measure);
  auto* bker = leaf(boundary, "kernel", "transition kernel between cylinders", boundary_kernel);
  bker->add_option("--time", cfg.times, "times (repeatable, default 1)");
  auto* bsim = leaf(boundary, "simulate", "simulate the boundary process", boundary_simulate);
  bsim->add_flag("--reflected", cfg.reflected, "conservative process with renewals");
  bsim->add_option("--horizon", cfg.horizon, "time horizon (reflected default 10)");
  bsim->add_option("--ray", cfg.ray, "start ray (default: spec ray, empty samples from the exit law)");
  bsim->add_option("--start", cfg.start, "alias of --ray");
  bsim->add_option("--trace", cfg.trace, "write segment CSV (path,time,ray) to this file");

  CLI::App* martin = app.add_subcommand("martin", "Martin kernel")->require_subcommand(1);
  auto* mk = leaf(martin, "kernel", "kernel values along a ray", martin_kernel_cmd);
  mk->add_option("--ray", cfg.ray, "boundary ray (default: spec ray)");
  mk->add_option("--node", cfg.nodes, "node paths (repeatable, default levels <= 3)");
  mk->add_option("--route", cfg.route, "ratio, series, irregular or all");

  CLI::App* ultra = app.add_subcommand("ultra", "ultrametric matrices")->require_subcommand(1);
  leaf(ultra, "check", "ultrametric and hypothesis check; word-family boundary report", ultra_check);
  leaf(ultra, "embed", "minimal tree extension", ultra_embed);
  auto* ug = leaf(ultra, "generator", "generator Q = -U^-1", ultra_generator_cmd);
  ug->add_flag("--check", cfg.check, "certify QU = -I");

  CLI::App* report = app.add_subcommand("report", "acceptance report")->require_subcommand(1);
  leaf(report, "all", "run every acceptance criterion", report_all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("usage", "cli", e.what()).dump() << '\n';
    return kUsage;
  }

  try {
    Result r = action(cfg);
    emit(r, cfg);
    if (!r.fail_code.empty()) {
      std::cerr << error_json(r.fail_code, r.fail_module, r.fail_message, r.fail_context).dump() << '\n';
      return exit_code_for(r.fail_code);
    }
    return kOk;
  } catch (const Error& e) {
    std::cerr << error_json(e.code(), e.module(), e.what(), e.context()).dump() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << error_json("schema", "cli", e.what()).dump() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", "cli", e.what()).dump() << '\n';
    return kInternal;
  }
}
