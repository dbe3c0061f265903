#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "treepot/boundary_measure.hpp"

namespace treepot {

enum class KernelRoute { ratio, series, irregular, recurrent };
const char* to_string(KernelRoute r);

struct MartinValue {
  double value = 0.0;
  KernelRoute route = KernelRoute::ratio;
  RootMode mode = RootMode::absorbed;
  double error = 0.0;       // half-width of the bracket when available
  bool flagged = false;     // irregular route with a near-vanishing denominator
  double denominator = 0.0;  // irregular route only
};

// κ(i, ray). Regular rays use `route` (ratio or series); the irregular route
// evaluates the exit-law form. Recurrent chains return U_{iη}/w₀ tagged as such.
MartinValue martin_kernel(const ExitMeasure& mu, const Path& i, const Path& ray, KernelRoute route);
// recurrent case, no exit measure needed
MartinValue martin_kernel_recurrent(const WeightSequence& w, const Path& i, const Path& ray);

struct HarmonicFn {
  std::function<double(const Path&)> eval;
  std::string provenance;  // "simple", "column", "user"
  double operator()(const Path& i) const { return eval(i); }
};

// h = ∫U(W⁻¹φ)dμ in absorbed mode; reflected mode adds the constant 𝔼_μφ to the conservative part
HarmonicFn harmonic_from_simple(const ExitMeasure& mu, const SimpleFn& phi);
// h(i) = U_{i ray}; needs |i| < |ray| for points on the ray
HarmonicFn harmonic_from_column(std::shared_ptr<const WeightSequence> w, const Path& ray);

// max |Qh| over nodes with level <= max_level; nodes with more than `child_limit` children are skipped
struct ResidualReport {
  double max_residual = 0.0;
  std::size_t nodes = 0;
  std::size_t skipped = 0;
};
ResidualReport harmonic_residual(const TreeSpec& spec, const WeightSequence& w, RootMode mode, const HarmonicFn& h,
                                 int max_level, std::uint64_t child_limit = 4096);

// h(j) >= h(j⁻) on every realized pair
bool is_increasing(const TreeSpec& spec, const HarmonicFn& h, int max_level, double tol = 1e-12);

struct LevelMeasure {
  std::vector<std::map<Path, double>> alpha;  // alpha[n][j]
  std::vector<double> consistency;            // max |α⁽ⁿ⁾(k) - Σ_children α⁽ⁿ⁺¹⁾| per level n
  std::vector<double> total;                  // Σ_j α⁽ⁿ⁾(j)
  std::vector<double> variation;              // s_n, with h(r⁻) = 0 at n = 0
};
LevelMeasure harmonic_limit_measure(const TreeSpec& spec, const WeightSequence& w, RootMode mode,
                                    const HarmonicFn& h, int max_level, double harmonic_tol = 1e-10);

}  // namespace treepot
