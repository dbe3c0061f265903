#include "treepot/martin_harmonic.hpp"

#include <algorithm>
#include <cmath>

#include "treepot/error.hpp"

namespace treepot {

const char* to_string(KernelRoute r) {
  switch (r) {
    case KernelRoute::ratio: return "ratio";
    case KernelRoute::series: return "series";
    case KernelRoute::irregular: return "irregular";
    default: return "recurrent";
  }
}

namespace {

Path prefix(const Path& p, int n) { return Path(p.begin(), p.begin() + n); }

// ∫U_{ηξ} P_x{X_ζ ∈ dη}, the tail beyond the ray resolution is charged at w_N
double exit_integral(const ChainAnalysis& a, const Path& x, const Path& ray) {
  const WeightSequence& w = a.weights();
  const int N = static_cast<int>(ray.size());
  double s = 0.0;
  double cur = a.exit_into(x, {}).mid();
  for (int n = 0; n < N; ++n) {
    double next = a.exit_into(x, prefix(ray, n + 1)).mid();
    s += w.w(n) * (cur - next);
    cur = next;
  }
  return s + w.w(N) * cur;
}

}  // namespace

MartinValue martin_kernel_recurrent(const WeightSequence& w, const Path& i, const Path& ray) {
  MartinValue v;
  v.route = KernelRoute::recurrent;
  v.value = w.w(common_prefix(i, ray)) / w.w(0);
  return v;
}

MartinValue martin_kernel(const ExitMeasure& mu, const Path& i, const Path& ray, KernelRoute route) {
  const ChainAnalysis& a = mu.analysis();
  const WeightSequence& w = mu.weights();
  const int m = common_prefix(i, ray);
  if (m >= static_cast<int>(ray.size()) && !(i.empty() && ray.empty()))
    throw Error("resolution", "martin_harmonic", "ray resolution must exceed the meet level",
                {{"node", path_string(i)}, {"ray", path_string(ray)}});
  MartinValue v;
  v.route = route;
  v.mode = mu.mode();
  if (i.empty() && route != KernelRoute::irregular) {
    v.value = 1.0;
    return v;
  }
  switch (route) {
    case KernelRoute::ratio: {
      Path meet = prefix(i, m);
      Interval num = a.hitting(i, meet), den = a.hitting({}, meet);
      if (den.lo <= 0.0) throw Error("zero_mass", "martin_harmonic", "meet not reachable from the root");
      Interval r = num / den;
      v.value = r.mid();
      v.error = 0.5 * r.width();
      break;
    }
    case KernelRoute::series: {
      std::vector<double> E;
      for (int k = 0; k <= m + 1; ++k) E.push_back(conditional_U(mu, i, ray, k));
      double s = 0.0;
      if (mu.mode() == RootMode::absorbed) {
        s = E[0] / G(mu, ray, 0);
        for (int k = 1; k <= m + 1; ++k) s += (E[k] - E[k - 1]) / G(mu, ray, k);
        s /= mu.normalization().mid();
      } else {
        s = 1.0;
        for (int k = 1; k <= m + 1; ++k) s += (E[k] - E[k - 1]) / G(mu, ray, k);
      }
      v.value = s;
      v.error = std::max(mu.error({}), 1e-12) * std::abs(s);
      break;
    }
    case KernelRoute::irregular: {
      if (mu.mode() != RootMode::absorbed)
        throw Error("bad_argument", "martin_harmonic", "the irregular route needs the absorbed chain");
      double num = w.w(m) - exit_integral(a, i, ray);
      double den = w.w(0) - exit_integral(a, {}, ray);
      v.denominator = den;
      v.flagged = std::abs(den) < 1e-6;
      v.value = num / den;
      break;
    }
    case KernelRoute::recurrent:
      return martin_kernel_recurrent(w, i, ray);
  }
  return v;
}

HarmonicFn harmonic_from_simple(const ExitMeasure& mu, const SimpleFn& phi) {
  const bool reflected = mu.mode() == RootMode::reflected;
  SimpleFn psi = apply_W_inverse_simple(mu, phi, reflected);
  const double shift = reflected ? integral(mu, phi) : 0.0;
  std::vector<std::pair<Path, double>> weights;  // atom, ψ μ(C)
  for (auto& [atom, val] : psi.values)
    if (val != 0.0) weights.push_back({atom, val * mu.mass(atom)});
  const int n = psi.level;
  // the evaluator holds its own reference to the analysis
  auto keep = mu.analysis_ptr();
  ExitMeasure local(keep, mu.resolution());
  HarmonicFn h;
  h.provenance = "simple";
  h.eval = [local, weights, n, shift](const Path& i) {
    double s = shift;
    for (auto& [atom, c] : weights) s += c * conditional_U(local, i, atom, n);
    return s;
  };
  return h;
}

HarmonicFn harmonic_from_column(std::shared_ptr<const WeightSequence> w, const Path& ray) {
  HarmonicFn h;
  h.provenance = "column";
  h.eval = [w, ray](const Path& i) {
    int m = common_prefix(i, ray);
    if (m == static_cast<int>(ray.size()) && i.size() > ray.size())
      throw Error("resolution", "martin_harmonic", "node below the ray resolution");
    return w->w(m);
  };
  return h;
}

ResidualReport harmonic_residual(const TreeSpec& spec, const WeightSequence& w, RootMode mode, const HarmonicFn& h,
                                 int max_level, std::uint64_t child_limit) {
  ResidualReport rep;
  for (int l = 0; l <= max_level; ++l) {
    for (auto& tp : enumerate_level(spec, l)) {
      std::uint64_t nc = spec.num_children(tp.type, l);
      if (nc > child_limit) {
        ++rep.skipped;
        continue;
      }
      const double hi = h(tp.path);
      double r = 0.0;
      if (l > 0) {
        Path par(tp.path.begin(), tp.path.end() - 1);
        r += (h(par) - hi) / w.delta(l);
      } else if (mode == RootMode::absorbed) {
        r -= hi / w.w(0);
      }
      Path c = tp.path;
      c.push_back(0);
      double down = 0.0;
      for (std::uint64_t k = 0; k < nc; ++k) {
        c.back() = static_cast<std::uint32_t>(k);
        down += h(c) - hi;
      }
      r += down / w.delta(l + 1);
      rep.max_residual = std::max(rep.max_residual, std::abs(r));
      ++rep.nodes;
    }
  }
  return rep;
}

bool is_increasing(const TreeSpec& spec, const HarmonicFn& h, int max_level, double tol) {
  for (int l = 1; l <= max_level; ++l)
    for (auto& tp : enumerate_level(spec, l)) {
      Path par(tp.path.begin(), tp.path.end() - 1);
      if (h(tp.path) < h(par) - tol) return false;
    }
  return true;
}

LevelMeasure harmonic_limit_measure(const TreeSpec& spec, const WeightSequence& w, RootMode mode,
                                    const HarmonicFn& h, int max_level, double harmonic_tol) {
  auto res = harmonic_residual(spec, w, mode, h, max_level);
  if (res.max_residual > harmonic_tol)
    throw Error("not_harmonic", "martin_harmonic", "function is not harmonic on the window",
                {{"residual", std::to_string(res.max_residual)}});
  LevelMeasure lm;
  lm.alpha.resize(max_level + 1);
  lm.alpha[0][{}] = h({}) / w.w(0);
  lm.variation.push_back(std::abs(h({})) / w.w(0));
  for (int n = 1; n <= max_level; ++n) {
    double var = 0.0;
    for (auto& tp : enumerate_level(spec, n)) {
      Path par(tp.path.begin(), tp.path.end() - 1);
      double d = h(tp.path) - h(par);
      lm.alpha[n][tp.path] = d / w.delta(n);
      var += std::abs(d);
    }
    lm.variation.push_back(var / w.delta(n));
  }
  for (int n = 0; n <= max_level; ++n) {
    double t = 0.0;
    for (auto& [j, a] : lm.alpha[n]) t += a;
    lm.total.push_back(t);
  }
  for (int n = 0; n < max_level; ++n) {
    std::map<Path, double> sums;
    for (auto& [j, a] : lm.alpha[n + 1]) sums[Path(j.begin(), j.end() - 1)] += a;
    double c = 0.0;
    for (auto& [k, a] : lm.alpha[n]) c = std::max(c, std::abs(a - sums[k]));
    lm.consistency.push_back(c);
  }
  return lm;
}

}  // namespace treepot
