#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "treepot/interval.hpp"
#include "treepot/rng.hpp"
#include "treepot/tree_core.hpp"
#include "treepot/tree_matrix.hpp"
#include "treepot/weights.hpp"

namespace treepot {

struct ProbBracket {
  double lower = 0.0;
  double upper = 1.0;
  int depth = 0;
  bool converged = false;

  double mid() const { return 0.5 * (lower + upper); }
  double width() const { return upper - lower; }
  Interval interval() const { return {lower, upper}; }
};

std::vector<int> default_schedule();

// Escape data of the chain truncated at level `depth`, computed for both
// boundary conditions at once: side 0 kills nothing at the truncation level
// and bounds every subtree escape probability from below (Thomson bound on the
// uniform-split flow), side 1 treats the truncation level as already escaped.
// All path-based queries need paths strictly above the truncation level.
class ChainAnalysis {
 public:
  ChainAnalysis(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w, RootMode mode,
                int depth);

  int depth() const { return depth_; }
  RootMode mode() const { return mode_; }
  // set by converged_analysis when the schedule met its tolerance
  bool converged() const { return converged_; }
  void set_converged(bool c) { converged_ = c; }
  const TreeSpec& spec() const { return *spec_; }
  const WeightSequence& weights() const { return *w_; }
  std::shared_ptr<const TreeSpec> spec_ptr() const { return spec_; }
  std::shared_ptr<const WeightSequence> weights_ptr() const { return w_; }

  // e: probability to escape inside the own subtree before hitting the parent
  Interval escape(int type, int level) const;
  // S = Σ_c e_c / Δ_{level+1}: conductance from the node to infinity through its subtree
  Interval conductance(int type, int level) const;

  struct Step {
    int type = 0;
    int level = 0;
    double e[2]{};
    double ne[2]{};
    double S[2]{};
    double sib[2]{};   // Σ e over the siblings
    double a[2]{};     // probability to hit this node from its parent
    double beta[2]{};  // conductance from this node to the sinks outside its subtree
  };
  std::vector<Step> walk(const Path& p) const;

  // P_r{X_ζ ∈ ∂∞}
  Interval escape_probability() const;
  // ḡ(i) = P_i{T_∂r < ∞}; absorbed mode
  Interval absorption(const Path& i) const;
  Interval hitting(const Path& i, const Path& j) const;
  Interval green_diag(const Path& i) const;
  Interval potential(const Path& i, const Path& j) const;
  // P_j{X_ζ ∈ ∂∞(j)}
  Interval psi(const Path& j) const;
  // P_x{X_ζ ∈ ∂∞(j)}
  Interval exit_into(const Path& x, const Path& j) const;
  // μ(∂∞(c)) / μ(∂∞(c⁻)) for the last node of the path
  Interval mass_ratio(const Path& c) const;
  Interval mass(const Path& j) const;
  // G_n on any ray through `prefix`; needs |prefix| >= n - 1
  Interval g_value(const Path& prefix, int n) const;
  // energy of the uniform-split unit flow below a node; +inf when it cannot be bounded
  double uniform_flow_energy(int type, int level) const;

  // child index of a node drawn from the exit law restricted to its subtree
  std::uint64_t sample_child(int type, int level, Rng& rng) const;
  int child_type(int type, int level, std::uint64_t index) const { return spec_->child_type(type, level, index); }

 private:
  struct Vals {
    double e[2];
    double ne[2];  // 1 - e, kept separately for accuracy
    double S[2];
  };
  const Vals& vals(int type, int level) const;
  void check_level(int level, const char* what) const;
  bool subtree_recurrent(int type, int level) const;

  std::shared_ptr<const TreeSpec> spec_;
  std::shared_ptr<const WeightSequence> w_;
  RootMode mode_;
  int depth_;
  bool converged_ = false;
  mutable std::recursive_mutex mutex_;
  mutable std::unordered_map<std::uint64_t, Vals> memo_;
  mutable std::unordered_map<std::uint64_t, std::vector<std::pair<double, std::uint64_t>>> sampler_;
};

ProbBracket absorption_probability(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                                   const Path& i, const std::vector<int>& schedule, double tol);

struct Classification {
  enum class Status { transient, recurrent, undetermined } status = Status::undetermined;
  std::string evidence;
  ProbBracket g_root;
};
const char* to_string(Classification::Status s);

Classification classify_transience(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                                   const std::vector<int>& schedule, double tol);

ProbBracket hitting_probability(std::shared_ptr<const TreeSpec> spec, std::shared_ptr<const WeightSequence> w,
                                RootMode mode, const Path& i, const Path& j, const std::vector<int>& schedule,
                                double tol);

// Deepest schedule entry is used when the bracket of P_r{X_ζ ∈ ∂∞} never gets below tol.
std::shared_ptr<ChainAnalysis> converged_analysis(std::shared_ptr<const TreeSpec> spec,
                                                  std::shared_ptr<const WeightSequence> w, RootMode mode,
                                                  const std::vector<int>& schedule, double tol, int min_depth = 0);

struct Trajectory {
  enum class Status { absorbed, escaped, cap_hit } status = Status::cap_hit;
  std::vector<Path> nodes;
  std::vector<double> holding;
  Path final_node;  // escape: the ray prefix at max_level
  double total_time = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};
const char* to_string(Trajectory::Status s);

struct ChainCaps {
  int max_level = 64;  // <= 0: unset
  double max_time = 0.0;  // <= 0: unset
  std::uint64_t max_steps = 100000000;
  bool keep_steps = true;
};

Trajectory simulate_chain(const TreeSpec& spec, const WeightSequence& w, RootMode mode, const Path& start,
                          std::uint64_t seed, std::uint64_t index, const ChainCaps& caps);

struct EscapeSummary {
  std::map<std::string, std::uint64_t> status_counts;
  std::map<Path, std::uint64_t> cylinder_counts;  // escaped paths per resolution-R cylinder
  std::uint64_t paths = 0;
};

EscapeSummary simulate_escapes(const TreeSpec& spec, const WeightSequence& w, RootMode mode, const Path& start,
                               std::uint64_t seed, std::uint64_t paths, int resolution, const ChainCaps& caps);

}  // namespace treepot
