#include "treepot/boundary_measure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "treepot/error.hpp"

namespace treepot {

ExitMeasure::ExitMeasure(std::shared_ptr<ChainAnalysis> analysis, int resolution)
    : analysis_(std::move(analysis)), resolution_(resolution) {
  if (resolution_ < 0) throw Error("bad_argument", "boundary_measure", "negative resolution");
  if (resolution_ >= analysis_->depth())
    throw Error("resolution", "boundary_measure", "resolution must lie above the truncation depth",
                {{"resolution", std::to_string(resolution_)}, {"depth", std::to_string(analysis_->depth())}});
}

Interval ExitMeasure::mass_interval(const Path& j) const {
  if (static_cast<int>(j.size()) >= analysis_->depth())
    throw Error("resolution", "boundary_measure", "cylinder deeper than the measure resolution",
                {{"atom", path_string(j)}});
  return analysis_->mass(j);
}

std::vector<Path> ExitMeasure::atoms(int n, std::size_t limit) const {
  if (n >= analysis_->depth()) throw Error("resolution", "boundary_measure", "level beyond the measure resolution");
  std::vector<Path> out;
  Path p;
  std::function<void(int)> rec = [&](int type) {
    int l = static_cast<int>(p.size());
    if (l == n) {
      out.push_back(p);
      if (out.size() > limit) throw Error("depth_cap", "boundary_measure", "too many atoms to enumerate");
      return;
    }
    std::uint64_t idx = 0;
    for (auto& g : spec().children(type, l)) {
      if (analysis_->escape(g.type, l + 1).hi > 0.0) {
        for (std::uint64_t c = 0; c < g.count; ++c) {
          p.push_back(static_cast<std::uint32_t>(idx + c));
          rec(g.type);
          p.pop_back();
        }
      }
      idx += g.count;
    }
  };
  rec(spec().root_type());
  return out;
}

ExitMeasure exit_measure(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                         int resolution, const std::vector<int>& schedule, double tol, RootMode mode) {
  auto cl = classify_transience(spec, w, schedule, tol);
  if (cl.status == Classification::Status::recurrent)
    throw Error("recurrent", "boundary_measure", "exit measure undefined: the chain is recurrent",
                {{"evidence", cl.evidence}});
  auto a = converged_analysis(spec, w, mode, schedule, tol, resolution);
  if (a->conductance(spec->root_type(), 0).hi == 0.0)
    throw Error("recurrent", "boundary_measure", "exit measure undefined: no escape from the root");
  return ExitMeasure(a, resolution);
}

Interval g_process(const ExitMeasure& mu, const Path& ray, int n) { return mu.analysis().g_value(ray, n); }

double G(const ExitMeasure& mu, const Path& ray, int n) { return g_process(mu, ray, n).mid(); }

double conditional_U(const ExitMeasure& mu, const Path& i, const Path& ray, int k) {
  if (static_cast<int>(ray.size()) < k)
    throw Error("resolution", "boundary_measure", "ray shorter than the conditioning level");
  const WeightSequence& w = mu.weights();
  Path rk(ray.begin(), ray.begin() + k);
  if (!is_prefix(rk, i)) return w.w(common_prefix(i, rk));
  const double mk = mu.mass(rk);
  if (mk <= 0.0) throw Error("zero_mass", "boundary_measure", "conditioning on a zero-mass cylinder", {{"atom", path_string(rk)}});
  double sum = 0.0;
  Path cur = rk;
  double mcur = mk;
  for (std::size_t l = k; l < i.size(); ++l) {
    cur.push_back(i[l]);
    double mnext = mu.mass(cur);
    sum += w.w(static_cast<int>(l)) * (mcur - mnext);
    mcur = mnext;
  }
  sum += w.w(static_cast<int>(i.size())) * mcur;
  return sum / mk;
}

// ---------------------------------------------------------------- simple functions

double SimpleFn::at(const Path& atom) const {
  Path key(atom.begin(), atom.begin() + std::min<std::size_t>(atom.size(), level));
  if (static_cast<int>(key.size()) < level)
    throw Error("resolution", "boundary_measure", "point resolution below the function level");
  auto it = values.find(key);
  return it == values.end() ? 0.0 : it->second;
}

SimpleFn SimpleFn::constant(const ExitMeasure& mu, int level, double c) {
  SimpleFn f{level, {}};
  for (auto& a : mu.atoms(level)) f.values[a] = c;
  return f;
}

SimpleFn SimpleFn::indicator(const ExitMeasure& mu, int level, const Path& cylinder) {
  if (static_cast<int>(cylinder.size()) > level)
    throw Error("bad_argument", "boundary_measure", "cylinder finer than the function level");
  SimpleFn f{level, {}};
  for (auto& a : mu.atoms(level))
    if (is_prefix(cylinder, a)) f.values[a] = 1.0;
  return f;
}

SimpleFn SimpleFn::refine(const ExitMeasure& mu, int new_level) const {
  if (new_level < level) throw Error("bad_argument", "boundary_measure", "cannot coarsen a simple function");
  if (new_level == level) return *this;
  SimpleFn f{new_level, {}};
  for (auto& a : mu.atoms(new_level)) {
    double v = at(a);
    if (v != 0.0) f.values[a] = v;
  }
  return f;
}

namespace {

void check_support(const ExitMeasure& mu, const SimpleFn& f) {
  for (auto& [a, v] : f.values)
    if (v != 0.0 && mu.mass_interval(a).hi == 0.0)
      throw Error("zero_mass", "boundary_measure", "simple function charges a zero-mass atom", {{"atom", path_string(a)}});
}

// 𝔼(f|ℱ_k) on every prefix of `atom`, k = 0..level
std::vector<double> conditional_chain(const ExitMeasure& mu, const SimpleFn& f, const Path& atom) {
  std::vector<double> out;
  for (int k = 0; k <= f.level; ++k) out.push_back(conditional_expectation(mu, f, Path(atom.begin(), atom.begin() + k)));
  return out;
}

}  // namespace

double conditional_expectation(const ExitMeasure& mu, const SimpleFn& f, const Path& atom) {
  if (static_cast<int>(atom.size()) >= f.level) return f.at(atom);
  double m = mu.mass(atom);
  if (m <= 0.0) throw Error("zero_mass", "boundary_measure", "conditioning on a zero-mass cylinder", {{"atom", path_string(atom)}});
  double s = 0.0;
  for (auto it = f.values.lower_bound(atom); it != f.values.end() && is_prefix(atom, it->first); ++it)
    s += it->second * mu.mass(it->first);
  return s / m;
}

double integral(const ExitMeasure& mu, const SimpleFn& f) {
  double s = 0.0;
  for (auto& [a, v] : f.values) s += v * mu.mass(a);
  return s;
}

SimpleFn apply_W(const ExitMeasure& mu, const SimpleFn& f) {
  check_support(mu, f);
  const int n = f.level;
  const WeightSequence& w = mu.weights();
  SimpleFn out{n, {}};
  for (auto& b : mu.atoms(n)) {
    auto E = conditional_chain(mu, f, b);
    double v = 0.0;
    for (int k = 0; k < n; ++k) v += w.delta(k) * mu.mass(Path(b.begin(), b.begin() + k)) * E[k];
    v += G(mu, b, n) * E[n];
    out.values[b] = v;
  }
  return out;
}

SimpleFn apply_W_martingale(const ExitMeasure& mu, const SimpleFn& f) {
  check_support(mu, f);
  const int n = f.level;
  SimpleFn out{n, {}};
  for (auto& b : mu.atoms(n)) {
    auto E = conditional_chain(mu, f, b);
    double v = 0.0;
    for (int k = 0; k <= n; ++k) v += G(mu, b, k) * (E[k] - (k ? E[k - 1] : 0.0));
    out.values[b] = v;
  }
  return out;
}

SimpleFn apply_W_inverse_simple(const ExitMeasure& mu, const SimpleFn& phi, bool conservative) {
  check_support(mu, phi);
  const int n = phi.level;
  SimpleFn out{n, {}};
  for (auto& b : mu.atoms(n)) {
    auto E = conditional_chain(mu, phi, b);
    double v = conservative ? 0.0 : E[0] / G(mu, b, 0);
    for (int k = 1; k <= n; ++k) v += (E[k] - E[k - 1]) / G(mu, b, k);
    out.values[b] = v;
  }
  return out;
}

double w_inverse_kernel(const ExitMeasure& mu, const Path& xi, const Path& eta) {
  const int m = common_prefix(xi, eta);
  if (m >= static_cast<int>(std::min(xi.size(), eta.size())))
    throw Error("resolution", "boundary_measure", "points not separated at their resolution");
  const WeightSequence& w = mu.weights();
  double s = 0.0;
  for (int k = 0; k <= m; ++k) s += w.delta(k) / (G(mu, xi, k) * G(mu, xi, k + 1));
  return -s;
}

double dirichlet_H(const ExitMeasure& mu, const Path& xi, const Path& eta, bool conservative) {
  const int m = common_prefix(xi, eta);
  if (m >= static_cast<int>(std::min(xi.size(), eta.size())))
    throw Error("resolution", "boundary_measure", "points not separated at their resolution");
  double s = 0.0;
  for (int n = 0; n <= m; ++n) {
    double inv_n = (n == 0 && conservative) ? 0.0 : 1.0 / G(mu, xi, n);
    s += (1.0 / G(mu, xi, n + 1) - inv_n) / mu.mass(Path(xi.begin(), xi.begin() + n));
  }
  return s;
}

double dirichlet_form(const ExitMeasure& mu, const SimpleFn& f, const SimpleFn& g, bool conservative) {
  const int n = std::max(f.level, g.level);
  SimpleFn fr = f.refine(mu, n), gr = g.refine(mu, n);
  auto wf = apply_W_inverse_simple(mu, fr, conservative);
  double s = 0.0;
  for (auto& [b, v] : wf.values) s += gr.at(b) * v * mu.mass(b);
  return s;
}

double dirichlet_form_beurling_deny(const ExitMeasure& mu, const SimpleFn& f, const SimpleFn& g, bool conservative) {
  const int n = std::max(f.level, g.level);
  SimpleFn fr = f.refine(mu, n), gr = g.refine(mu, n);
  check_support(mu, fr);
  check_support(mu, gr);
  auto atoms = mu.atoms(n);
  std::vector<double> m(atoms.size()), fv(atoms.size()), gv(atoms.size());
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    m[a] = mu.mass(atoms[a]);
    fv[a] = fr.at(atoms[a]);
    gv[a] = gr.at(atoms[a]);
  }
  double jump = 0.0;
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::size_t b = a + 1; b < atoms.size(); ++b) {
      double df = fv[a] - fv[b], dg = gv[a] - gv[b];
      if (df == 0.0 || dg == 0.0) continue;
      jump += df * dg * dirichlet_H(mu, atoms[a], atoms[b], conservative) * m[a] * m[b];
    }
  double kill = 0.0;
  if (!conservative)
    for (std::size_t a = 0; a < atoms.size(); ++a) kill += fv[a] * gv[a] * m[a];
  return jump + (conservative ? 0.0 : kill / G(mu, {}, 0));
}

// ---------------------------------------------------------------- regularity

const char* to_string(RayReport::Status s) {
  switch (s) {
    case RayReport::Status::regular: return "regular";
    case RayReport::Status::irregular: return "irregular";
    default: return "undetermined";
  }
}

RayReport ray_regularity(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                         const Path& given, int depth, double tol) {
  RayReport r;
  r.depth = std::max(depth, static_cast<int>(given.size()) + 1);
  Path ray = given;
  ray.resize(r.depth - 1, 0);
  ChainAnalysis a(spec, w, RootMode::absorbed, r.depth);
  Path p;
  r.absorption.push_back(a.absorption(p));
  r.mass.push_back(a.mass(p));
  for (auto c : ray) {
    p.push_back(c);
    r.absorption.push_back(a.absorption(p));
    r.mass.push_back(a.mass(p));
  }
  const int N = static_cast<int>(ray.size());
  r.accessible = std::all_of(r.mass.begin(), r.mass.end(), [](const Interval& m) { return m.lo > 0.0; });
  bool decreasing = true;
  for (int n = std::max(1, N - 3); n <= N; ++n)
    if (r.absorption[n].hi > r.absorption[n - 1].hi) decreasing = false;
  double min_lower = 1.0;
  for (auto& g : r.absorption) min_lower = std::min(min_lower, g.lo);
  const double settled = r.absorption[std::max(0, N - 4)].lo;
  if (r.absorption[N].hi <= tol && decreasing) {
    r.status = RayReport::Status::regular;
  } else if (min_lower > tol && N >= 4 && r.absorption[N].lo >= 0.9 * settled) {
    r.status = RayReport::Status::irregular;
  }
  return r;
}

std::vector<Path> inaccessible_components(const ExitMeasure& mu, int max_level) {
  std::vector<Path> out;
  Path p;
  std::size_t visited = 0;
  std::function<void(int)> rec = [&](int type) {
    int l = static_cast<int>(p.size());
    if (l >= max_level) return;
    std::uint64_t idx = 0;
    for (auto& g : mu.spec().children(type, l)) {
      for (std::uint64_t c = 0; c < g.count; ++c) {
        if (++visited > 200000) throw Error("depth_cap", "boundary_measure", "too many cylinders to scan");
        p.push_back(static_cast<std::uint32_t>(idx + c));
        if (mu.analysis().escape(g.type, l + 1).hi == 0.0)
          out.push_back(p);
        else
          rec(g.type);
        p.pop_back();
      }
      idx += g.count;
    }
  };
  rec(mu.spec().root_type());
  return out;
}

}  // namespace treepot
