#include "treepot/chain_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "treepot/error.hpp"

namespace treepot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t key(int type, int level) {
  return (static_cast<std::uint64_t>(type) << 20) | static_cast<std::uint64_t>(level);
}

// x/(1+x) and 1/(1+x) without cancellation, x >= 0 possibly infinite
void split_ratio(double x, double& e, double& ne) {
  if (std::isinf(x)) {
    e = 1.0;
    ne = 0.0;
  } else {
    e = x / (1.0 + x);
    ne = 1.0 / (1.0 + x);
  }
}
}  // namespace

std::vector<int> default_schedule() { return {8, 16, 24, 32, 40, 48, 56, 64}; }

ChainAnalysis::ChainAnalysis(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                             RootMode mode, int depth)
    : spec_(std::move(spec)), w_(std::move(w)), mode_(mode), depth_(depth) {
  if (spec_->is_finite()) depth_ = std::max(depth_, spec_->depth() + 1);
  if (depth_ < 1) throw Error("bad_argument", "chain_sim", "truncation depth must be positive");
  if (w_->max_level() < depth_ && !spec_->is_finite())
    throw Error("depth_cap", "chain_sim", "weights not defined down to the truncation depth");
}

void ChainAnalysis::check_level(int level, const char* what) const {
  if (level >= depth_)
    throw Error("resolution", "chain_sim", std::string(what) + ": level not above the truncation depth",
                {{"level", std::to_string(level)}, {"depth", std::to_string(depth_)}});
}

double ChainAnalysis::uniform_flow_energy(int type, int level) const {
  // flow² summed per type, normalized; the scale is carried in log form
  std::map<int, double> mass{{type, 1.0}};
  double log_scale = 0.0;
  double total = 0.0, prev = kInf, prev_prev = kInf;
  int shrinking = 0;
  for (int k = level + 1; k <= level + 400; ++k) {
    std::map<int, double> next;
    for (auto [t, m] : mass) {
      std::vector<ChildGroup> groups;
      try {
        groups = spec_->children(t, k - 1);
      } catch (const Error&) {
        // the type graph cannot be expanded this far: geometric tail if the terms settled
        if (shrinking >= 8 && prev > 0.0 && prev_prev > prev) {
          double q = prev / prev_prev;
          return total + prev * q / (1.0 - q);
        }
        return kInf;
      }
      double n = 0.0;
      std::vector<std::pair<int, double>> alive;
      for (auto& g : groups) {
        if (g.count == 0) continue;
        if (spec_->allows_leaves() && spec_->num_children(g.type, k) == 0) continue;
        alive.push_back({g.type, static_cast<double>(g.count)});
        n += static_cast<double>(g.count);
      }
      if (n == 0.0) return kInf;
      for (auto [ct, c] : alive) next[ct] += m * c / (n * n);
    }
    double level_sum = 0.0;
    for (auto& [t, m] : next) level_sum += m;
    for (auto& [t, m] : next) m /= level_sum;
    log_scale += std::log(level_sum);
    double log_term = log_scale + w_->log_delta(k);
    if (log_term > 700.0) return kInf;
    double term = std::exp(log_term);
    total += term;
    mass.swap(next);
    shrinking = term < prev ? shrinking + 1 : 0;
    if (shrinking >= 8 && term <= 1e-17 * total) {
      double q = term / prev;
      if (q < 1.0) return total + term * q / (1.0 - q);
    }
    prev_prev = prev;
    prev = term;
  }
  return kInf;
}

bool ChainAnalysis::subtree_recurrent(int type, int level) const {
  // level cut-sets below the node: R >= Σ_k Δ_k / N_k, divergent when the terms stop decreasing
  std::map<int, double> count{{type, 1.0}};
  std::vector<double> terms;
  for (int k = level + 1; k <= level + 64; ++k) {
    std::map<int, double> next;
    try {
      for (auto [t, n] : count)
        for (auto& g : spec_->children(t, k - 1))
          if (g.count) next[g.type] += n * static_cast<double>(g.count);
    } catch (const Error&) {
      return false;
    }
    count.swap(next);
    double N = 0.0;
    for (auto& [t, n] : count) N += n;
    if (N == 0.0) return true;
    terms.push_back(w_->log_delta(k) - std::log(N));
  }
  for (std::size_t k = terms.size() - 16; k < terms.size(); ++k)
    if (terms[k] < terms[k - 1] - 1e-12) return false;
  return true;
}

const ChainAnalysis::Vals& ChainAnalysis::vals(int type, int level) const {
  std::scoped_lock lock(mutex_);
  auto it = memo_.find(key(type, level));
  if (it != memo_.end()) return it->second;
  Vals v{};
  const double up = level == 0 ? w_->w(0) : w_->delta(level);  // resistance of the edge above
  if (spec_->allows_leaves() && spec_->num_children(type, level) == 0) {
    v = {{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}};
  } else if (level >= depth_) {
    double energy = uniform_flow_energy(type, level);
    double s_lo = std::isinf(energy) ? 0.0 : 1.0 / energy;
    v.S[0] = s_lo;
    split_ratio(s_lo * up, v.e[0], v.ne[0]);
    if (std::isinf(energy) && subtree_recurrent(type, level)) {
      v.S[1] = 0.0;
      v.e[1] = 0.0;
      v.ne[1] = 1.0;
    } else {
      v.S[1] = kInf;
      v.e[1] = 1.0;
      v.ne[1] = 0.0;
    }
  } else {
    auto groups = spec_->children(type, level);
    const double inv = 1.0 / w_->delta(level + 1);
    double sum[2] = {0.0, 0.0};
    for (auto& g : groups) {
      if (g.count == 0) continue;
      const Vals& c = vals(g.type, level + 1);
      for (int s = 0; s < 2; ++s) sum[s] += static_cast<double>(g.count) * c.e[s];
    }
    for (int s = 0; s < 2; ++s) {
      v.S[s] = sum[s] * inv;
      split_ratio(v.S[s] * up, v.e[s], v.ne[s]);
    }
  }
  return memo_.emplace(key(type, level), v).first->second;
}

Interval ChainAnalysis::escape(int type, int level) const {
  const Vals& v = vals(type, level);
  return {v.e[0], v.e[1]};
}

Interval ChainAnalysis::conductance(int type, int level) const {
  const Vals& v = vals(type, level);
  return {v.S[0], v.S[1]};
}

std::vector<ChainAnalysis::Step> ChainAnalysis::walk(const Path& p) const {
  std::vector<Step> out(p.size() + 1);
  Step& r = out[0];
  r.type = spec_->root_type();
  r.level = 0;
  const Vals& rv = vals(r.type, 0);
  for (int s = 0; s < 2; ++s) {
    r.e[s] = rv.e[s];
    r.ne[s] = rv.ne[s];
    r.S[s] = rv.S[s];
    r.a[s] = 1.0;
    r.beta[s] = mode_ == RootMode::absorbed ? 1.0 / w_->w(0) : 0.0;
  }
  for (std::size_t k = 1; k <= p.size(); ++k) {
    const Step& par = out[k - 1];
    Step& st = out[k];
    st.level = static_cast<int>(k);
    auto groups = spec_->children(par.type, par.level);
    std::uint64_t idx = p[k - 1];
    double sib[2] = {0.0, 0.0};
    bool found = false;
    for (auto& g : groups) {
      std::uint64_t c = g.count;
      if (!found && idx < g.count) {
        st.type = g.type;
        found = true;
        c -= 1;
      } else if (!found) {
        idx -= g.count;
      }
      if (c == 0) continue;
      const Vals& cv = vals(g.type, st.level);
      for (int s = 0; s < 2; ++s) sib[s] += static_cast<double>(c) * cv.e[s];
    }
    if (!found) throw Error("unrealized_node", "chain_sim", "path leaves the tree", {{"path", path_string(p)}});
    const Vals& v = vals(st.type, st.level);
    const double lambda = 1.0 / w_->delta(st.level);
    for (int s = 0; s < 2; ++s) {
      st.e[s] = v.e[s];
      st.ne[s] = v.ne[s];
      st.S[s] = v.S[s];
      st.sib[s] = sib[s];
      double rest = par.beta[s] + lambda * sib[s];
      st.a[s] = lambda / (rest + lambda);
      st.beta[s] = lambda * rest / (lambda + rest);
    }
  }
  return out;
}

Interval ChainAnalysis::escape_probability() const {
  const Vals& v = vals(spec_->root_type(), 0);
  if (mode_ == RootMode::reflected) return v.S[0] > 0 ? Interval{1.0, 1.0} : Interval{0.0, 1.0};
  const double beta = 1.0 / w_->w(0);
  auto f = [&](double S) { return std::isinf(S) ? 1.0 : S / (beta + S); };
  return {f(v.S[0]), f(v.S[1])};
}

Interval ChainAnalysis::absorption(const Path& i) const {
  if (mode_ != RootMode::absorbed) throw Error("bad_argument", "chain_sim", "absorption needs the absorbed mode");
  check_level(static_cast<int>(i.size()), "absorption");
  auto st = walk(i);
  const double beta = 1.0 / w_->w(0);
  double val[2];
  for (int s = 0; s < 2; ++s) {
    double g = beta / (beta + st[0].S[s]);
    for (std::size_t k = 1; k < st.size(); ++k) g *= st[k].ne[s];
    val[s] = g;
  }
  return ordered(val[0], val[1]);
}

Interval ChainAnalysis::hitting(const Path& i, const Path& j) const {
  check_level(static_cast<int>(std::max(i.size(), j.size())), "hitting");
  const int m = common_prefix(i, j);
  auto si = walk(i);
  auto sj = walk(j);
  double val[2];
  for (int s = 0; s < 2; ++s) {
    double h = 1.0;
    for (std::size_t k = m + 1; k < si.size(); ++k) h *= si[k].ne[s];
    for (std::size_t k = m + 1; k < sj.size(); ++k) h *= sj[k].a[s];
    val[s] = h;
  }
  return ordered(val[0], val[1]);
}

Interval ChainAnalysis::green_diag(const Path& i) const {
  check_level(static_cast<int>(i.size()), "green_diag");
  auto st = walk(i).back();
  double val[2];
  for (int s = 0; s < 2; ++s) val[s] = 1.0 / (st.beta[s] + st.S[s]);
  if (std::isinf(val[0]) || std::isinf(val[1]))
    throw Error("recurrent", "chain_sim", "potential is infinite (no escape and no killing)");
  return ordered(val[0], val[1]);
}

Interval ChainAnalysis::potential(const Path& i, const Path& j) const {
  auto h = hitting(i, j);
  auto v = green_diag(j);
  return h * v;
}

Interval ChainAnalysis::psi(const Path& j) const {
  check_level(static_cast<int>(j.size()), "psi");
  auto st = walk(j).back();
  auto f = [](double S, double beta) { return S == 0.0 ? 0.0 : S / (beta + S); };
  return {f(st.S[0], st.beta[1]), f(st.S[1], st.beta[0])};
}

Interval ChainAnalysis::exit_into(const Path& x, const Path& j) const {
  check_level(static_cast<int>(std::max(x.size(), j.size())), "exit_into");
  Interval ps = psi(j);
  if (is_prefix(j, x)) {
    auto st = walk(x);
    double pi[2] = {1.0, 1.0};
    for (std::size_t k = j.size() + 1; k < st.size(); ++k)
      for (int s = 0; s < 2; ++s) pi[s] *= st[k].ne[s];
    Interval p = ordered(pi[0], pi[1]);
    return {1.0 - p.hi * (1.0 - ps.lo), 1.0 - p.lo * (1.0 - ps.hi)};
  }
  return hitting(x, j) * ps;
}

Interval ChainAnalysis::mass_ratio(const Path& c) const {
  if (c.empty()) return {1.0, 1.0};
  check_level(static_cast<int>(c.size()), "mass_ratio");
  auto st = walk(c).back();
  auto f = [](double e, double sib) { return e == 0.0 ? 0.0 : e / (e + sib); };
  return {f(st.e[0], st.sib[1]), f(st.e[1], st.sib[0])};
}

Interval ChainAnalysis::mass(const Path& j) const {
  check_level(static_cast<int>(j.size()), "mass");
  auto st = walk(j);
  Interval m{1.0, 1.0};
  for (std::size_t k = 1; k < st.size(); ++k) {
    auto f = [](double e, double sib) { return e == 0.0 ? 0.0 : e / (e + sib); };
    m = m * Interval{f(st[k].e[0], st[k].sib[1]), f(st[k].e[1], st[k].sib[0])};
  }
  return m;
}

Interval ChainAnalysis::g_value(const Path& prefix, int n) const {
  if (n < 0) throw Error("bad_argument", "boundary_measure", "negative G index");
  if (n == 0) {
    const Vals& v = vals(spec_->root_type(), 0);
    if (v.S[0] == 0.0) throw Error("recurrent", "boundary_measure", "G is undefined: no escape from the root");
    const double w0 = w_->w(0);
    return {w0 + 1.0 / v.S[1], w0 + 1.0 / v.S[0]};
  }
  if (static_cast<int>(prefix.size()) < n - 1)
    throw Error("resolution", "boundary_measure", "ray resolution below the G index", {{"n", std::to_string(n)}});
  Path i(prefix.begin(), prefix.begin() + (n - 1));
  check_level(n - 1, "g_value");
  Interval m = mass(i);
  auto st = walk(i).back();
  if (m.hi == 0.0 || st.S[0] == 0.0)
    throw Error("zero_mass", "boundary_measure", "G undefined on a zero-mass cylinder", {{"atom", path_string(i)}});
  return {m.lo / st.S[1], m.hi / st.S[0]};
}

std::uint64_t ChainAnalysis::sample_child(int type, int level, Rng& rng) const {
  const std::vector<std::pair<double, std::uint64_t>>* cum;
  {
    std::scoped_lock lock(mutex_);
    auto it = sampler_.find(key(type, level));
    if (it == sampler_.end()) {
      std::vector<std::pair<double, std::uint64_t>> c;
      double acc = 0.0;
      for (auto& g : spec_->children(type, level)) {
        const Vals& v = vals(g.type, level + 1);
        acc += static_cast<double>(g.count) * 0.5 * (v.e[0] + v.e[1]);
        c.push_back({acc, g.count});
      }
      if (!(acc > 0)) throw Error("zero_mass", "chain_sim", "cannot sample below a zero-mass cylinder");
      it = sampler_.emplace(key(type, level), std::move(c)).first;
    }
    cum = &it->second;
  }
  double u = rng.uniform() * cum->back().first;
  std::uint64_t offset = 0;
  for (auto& [acc, count] : *cum) {
    if (u < acc && count > 0) return offset + rng.below(count);
    offset += count;
  }
  // rounding at the top end: last non-empty group
  offset = 0;
  std::uint64_t last_off = 0, last_count = 0;
  for (auto& [acc, count] : *cum) {
    if (count) {
      last_off = offset;
      last_count = count;
    }
    offset += count;
  }
  return last_off + rng.below(last_count);
}

// ---------------------------------------------------------------- brackets

std::shared_ptr<ChainAnalysis> converged_analysis(std::shared_ptr<const TreeSpec> spec,
                                                  std::shared_ptr<const WeightSequence> w, RootMode mode,
                                                  const std::vector<int>& schedule, double tol, int min_depth) {
  if (schedule.empty()) throw Error("bad_argument", "chain_sim", "empty depth schedule");
  std::shared_ptr<ChainAnalysis> last;
  for (int m : schedule) {
    if (m <= min_depth) continue;
    if (w->max_level() < m && !spec->is_finite()) break;
    auto a = std::make_shared<ChainAnalysis>(spec, w, mode, m);
    last = a;
    double width;
    if (mode == RootMode::absorbed) {
      width = a->escape_probability().width();
    } else {
      auto S = a->conductance(spec->root_type(), 0);
      width = S.lo > 0 ? (S.hi - S.lo) / S.lo : kInf;
    }
    if (width <= tol || spec->is_finite()) {
      a->set_converged(true);
      return a;
    }
  }
  if (!last) {
    last = std::make_shared<ChainAnalysis>(spec, w, mode, std::max(min_depth + 1, schedule.back()));
  }
  return last;
}

ProbBracket absorption_probability(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                                   const Path& i, const std::vector<int>& schedule, double tol) {
  ProbBracket b;
  for (int m : schedule) {
    if (m <= static_cast<int>(i.size())) continue;
    if (w->max_level() < m && !spec->is_finite()) break;
    ChainAnalysis a(spec, w, RootMode::absorbed, m);
    auto g = a.absorption(i);
    b = {std::max(0.0, g.lo), std::min(1.0, g.hi), a.depth(), false};
    if (b.width() <= tol || spec->is_finite()) {
      b.converged = true;
      break;
    }
  }
  return b;
}

const char* to_string(Classification::Status s) {
  switch (s) {
    case Classification::Status::transient: return "transient";
    case Classification::Status::recurrent: return "recurrent";
    default: return "undetermined";
  }
}

Classification classify_transience(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                                   const std::vector<int>& schedule, double tol) {
  Classification c;
  if (w->is_bounded() && !spec->is_finite()) {
    c.status = Classification::Status::transient;
    c.evidence = "bounded weights: U is bounded";
    return c;
  }
  c.g_root = absorption_probability(spec, w, {}, schedule, tol);
  if (c.g_root.upper < 1.0 - tol) {
    c.status = Classification::Status::transient;
    c.evidence = "absorption probability at the root bounded away from 1";
    return c;
  }
  if (c.g_root.lower >= 1.0 - tol && c.g_root.converged) {
    c.status = Classification::Status::recurrent;
    c.evidence = "absorption probability at the root equals 1 within tolerance";
    return c;
  }
  // level cut-sets: R(r -> ∞) >= Σ_k Δ_k / N_k; a nondecreasing tail of terms diverges
  std::map<int, double> count{{spec->root_type(), 1.0}};
  int horizon = std::min(schedule.empty() ? 64 : schedule.back(), w->max_level());
  std::vector<double> terms;
  for (int k = 1; k <= horizon; ++k) {
    std::map<int, double> next;
    for (auto [t, n] : count)
      for (auto& g : spec->children(t, k - 1))
        if (g.count) next[g.type] += n * static_cast<double>(g.count);
    count.swap(next);
    double N = 0.0;
    for (auto& [t, n] : count) N += n;
    if (N == 0.0) break;
    terms.push_back(std::exp(w->log_delta(k) - std::log(N)));
  }
  const std::size_t tail = 16;
  if (terms.size() > tail) {
    bool nondecreasing = true;
    for (std::size_t k = terms.size() - tail; k < terms.size(); ++k)
      if (terms[k] < terms[k - 1] * (1.0 - 1e-12)) nondecreasing = false;
    if (nondecreasing) {
      c.status = Classification::Status::recurrent;
      c.evidence = "level cut-set resistance series has a nondecreasing tail and diverges";
      return c;
    }
  }
  c.evidence = "bracket did not separate from 1 and no divergence certificate";
  return c;
}

ProbBracket hitting_probability(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                                RootMode mode, const Path& i, const Path& j, const std::vector<int>& schedule,
                                double tol) {
  ProbBracket b;
  if (i == j) return {1.0, 1.0, 0, true};
  const int need = static_cast<int>(std::max(i.size(), j.size()));
  for (int m : schedule) {
    if (m <= need) continue;
    if (w->max_level() < m && !spec->is_finite()) break;
    ChainAnalysis a(spec, w, mode, m);
    auto h = a.hitting(i, j);
    b = {std::max(0.0, h.lo), std::min(1.0, h.hi), a.depth(), false};
    if (b.width() <= tol || spec->is_finite()) {
      b.converged = true;
      break;
    }
  }
  return b;
}

// ---------------------------------------------------------------- simulation

const char* to_string(Trajectory::Status s) {
  switch (s) {
    case Trajectory::Status::absorbed: return "absorbed";
    case Trajectory::Status::escaped: return "escaped";
    default: return "cap-hit";
  }
}

Trajectory simulate_chain(const TreeSpec& spec, const WeightSequence& w, RootMode mode, const Path& start,
                          std::uint64_t seed, std::uint64_t index, const ChainCaps& caps) {
  const bool level_cap = caps.max_level > 0;
  const bool time_cap = caps.max_time > 0;
  if (!level_cap && !time_cap && (!spec.is_finite() || mode == RootMode::reflected))
    throw Error("bad_argument", "chain_sim", "both caps unset on a chain that need not stop");
  Trajectory tr;
  tr.seed = seed;
  tr.index = index;
  Rng rng(seed, index);

  Path path;
  std::vector<int> types{spec.root_type()};
  for (auto c : start) {
    types.push_back(spec.child_type(types.back(), static_cast<int>(path.size()), c));
    path.push_back(c);
  }
  const double kill = mode == RootMode::absorbed ? 1.0 / w.w(0) : 0.0;
  double t = 0.0;
  while (true) {
    const int l = static_cast<int>(path.size());
    if (level_cap && l >= caps.max_level) {
      tr.status = Trajectory::Status::escaped;
      break;
    }
    if (tr.steps >= caps.max_steps) break;
    double up = l == 0 ? kill : 1.0 / w.delta(l);
    std::uint64_t nc = spec.num_children(types.back(), l);
    double down = nc ? static_cast<double>(nc) / w.delta(l + 1) : 0.0;
    double rate = up + down;
    if (rate == 0.0) throw Error("bad_argument", "chain_sim", "isolated state");
    double hold = rng.exponential(rate);
    if (time_cap && t + hold > caps.max_time) {
      if (caps.keep_steps) {
        tr.nodes.push_back(path);
        tr.holding.push_back(caps.max_time - t);
      }
      t = caps.max_time;
      break;
    }
    t += hold;
    if (caps.keep_steps) {
      tr.nodes.push_back(path);
      tr.holding.push_back(hold);
    }
    ++tr.steps;
    if (rng.uniform() * rate < up) {
      if (l == 0) {
        tr.status = Trajectory::Status::absorbed;
        break;
      }
      path.pop_back();
      types.pop_back();
    } else {
      std::uint64_t c = rng.below(nc);
      types.push_back(spec.child_type(types.back(), l, c));
      path.push_back(static_cast<std::uint32_t>(c));
    }
  }
  tr.final_node = path;
  tr.total_time = t;
  return tr;
}

EscapeSummary simulate_escapes(const TreeSpec& spec, const WeightSequence& w, RootMode mode, const Path& start,
                               std::uint64_t seed, std::uint64_t paths, int resolution, const ChainCaps& caps) {
  EscapeSummary s;
  ChainCaps c = caps;
  c.keep_steps = false;
  for (std::uint64_t k = 0; k < paths; ++k) {
    auto tr = simulate_chain(spec, w, mode, start, seed, k, c);
    ++s.status_counts[to_string(tr.status)];
    if (tr.status == Trajectory::Status::escaped && static_cast<int>(tr.final_node.size()) >= resolution)
      ++s.cylinder_counts[Path(tr.final_node.begin(), tr.final_node.begin() + resolution)];
  }
  s.paths = paths;
  return s;
}

}  // namespace treepot
