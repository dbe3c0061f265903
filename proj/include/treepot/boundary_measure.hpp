#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "treepot/chain_sim.hpp"
#include "treepot/interval.hpp"
#include "treepot/tree_core.hpp"

namespace treepot {

// Exit law on cylinders up to a resolution, with enclosures.
// Absorbed mode conditions on escape; reflected mode needs no conditioning.
class ExitMeasure {
 public:
  ExitMeasure(std::shared_ptr<ChainAnalysis> analysis, int resolution);

  int resolution() const { return resolution_; }
  RootMode mode() const { return analysis_->mode(); }
  const ChainAnalysis& analysis() const { return *analysis_; }
  std::shared_ptr<ChainAnalysis> analysis_ptr() const { return analysis_; }
  const TreeSpec& spec() const { return analysis_->spec(); }
  const WeightSequence& weights() const { return analysis_->weights(); }
  bool converged() const { return analysis_->converged(); }

  Interval mass_interval(const Path& j) const;
  double mass(const Path& j) const { return mass_interval(j).mid(); }
  double error(const Path& j) const { return 0.5 * mass_interval(j).width(); }
  // P_r{X_ζ ∈ ∂∞}
  Interval normalization() const { return analysis_->escape_probability(); }

  // level-n cylinders with positive mass, canonical order
  std::vector<Path> atoms(int n, std::size_t limit = 1000000) const;

 private:
  std::shared_ptr<ChainAnalysis> analysis_;
  int resolution_;
};

ExitMeasure exit_measure(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                         int resolution, const std::vector<int>& schedule, double tol, RootMode mode);

// G_n on a ray; the value depends only on the level-(n-1) cylinder
Interval g_process(const ExitMeasure& mu, const Path& ray, int n);
double G(const ExitMeasure& mu, const Path& ray, int n);

// 𝔼_μ(U_{i·} | ℱ_k) evaluated on the ray
double conditional_U(const ExitMeasure& mu, const Path& i, const Path& ray, int k);

// F_n-measurable function: value per level-n cylinder, absent cylinders are 0
struct SimpleFn {
  int level = 0;
  std::map<Path, double> values;

  double at(const Path& atom) const;
  static SimpleFn constant(const ExitMeasure& mu, int level, double c);
  static SimpleFn indicator(const ExitMeasure& mu, int level, const Path& cylinder);
  // same function on a finer partition
  SimpleFn refine(const ExitMeasure& mu, int level) const;
};

// 𝔼_μ(f | ℱ_k) on the level-k cylinder `atom`
double conditional_expectation(const ExitMeasure& mu, const SimpleFn& f, const Path& atom);
double integral(const ExitMeasure& mu, const SimpleFn& f);

SimpleFn apply_W(const ExitMeasure& mu, const SimpleFn& f);
// Σ_n G_n (𝔼(f|ℱ_n) - 𝔼(f|ℱ_{n-1})); equals apply_W
SimpleFn apply_W_martingale(const ExitMeasure& mu, const SimpleFn& f);
// conservative: the killing part G₀⁻¹𝔼_μ is dropped
SimpleFn apply_W_inverse_simple(const ExitMeasure& mu, const SimpleFn& phi, bool conservative = false);
double w_inverse_kernel(const ExitMeasure& mu, const Path& xi, const Path& eta);

double dirichlet_H(const ExitMeasure& mu, const Path& xi, const Path& eta, bool conservative = false);
// ∫ g W⁻¹f dμ
double dirichlet_form(const ExitMeasure& mu, const SimpleFn& f, const SimpleFn& g, bool conservative = false);
// jump part with H plus the killing term (absorbed)
double dirichlet_form_beurling_deny(const ExitMeasure& mu, const SimpleFn& f, const SimpleFn& g,
                                    bool conservative = false);

struct RayReport {
  enum class Status { regular, irregular, undetermined } status = Status::undetermined;
  bool accessible = false;
  std::vector<Interval> absorption;  // ḡ(ray(n))
  std::vector<Interval> mass;        // μ(Cⁿ(ray))
  int depth = 0;
};
const char* to_string(RayReport::Status s);

// the ray is continued through child 0 down to level depth - 1
RayReport ray_regularity(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                         const Path& ray, int depth, double tol);

// maximal cylinders (up to max_level) whose mass is certified to vanish
std::vector<Path> inaccessible_components(const ExitMeasure& mu, int max_level);

}  // namespace treepot
