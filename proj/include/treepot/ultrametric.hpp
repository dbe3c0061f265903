#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "treepot/chain_sim.hpp"
#include "treepot/rng.hpp"
#include "treepot/tree_core.hpp"
#include "treepot/weights.hpp"

namespace treepot {

struct UltrametricCheck {
  bool ok = true;
  // first violation: U_ij < min(U_ik, U_kj), 0-based
  int i = -1, j = -1, k = -1;
  std::string reason;  // "triangle", "diagonal", "positivity"
};
// exhaustive triple check; throws on asymmetric input
UltrametricCheck verify_ultrametric(const Eigen::MatrixXd& U);

struct HypothesisReport {
  bool h1 = true;
  int h1_i = -1, h1_j = -1;
  bool h2 = true;               // finite window: the value set is finite
  double min_gap = 0.0;         // smallest gap in the sorted value set
  std::vector<double> values;   // 𝒲
  bool h3 = true;
  std::vector<int> class_counts;  // classes per value
  std::string h4 = "certified";   // certified, refuted, undetermined
};
HypothesisReport check_hypotheses(const Eigen::MatrixXd& U);

// Minimal tree extension of a finite ultrametric matrix. Nodes are
// (class, value) pairs; node 0 is the root.
struct TreeExtension {
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  std::vector<int> level;
  std::vector<double> value;
  std::vector<std::vector<int>> cls;  // members of the class, sorted
  std::vector<int> embed;             // I index -> node
  std::vector<int> member;            // node -> I index or -1
  std::vector<double> values;         // 𝒲 ascending

  int size() const { return static_cast<int>(parent.size()); }
  int num_indices() const { return static_cast<int>(embed.size()); }
  bool added(int node) const { return member[node] < 0; }
  int meet(int a, int b) const;
  double u(int a, int b) const { return value[meet(a, b)]; }
  std::vector<int> geodesic(int a, int b) const;
  Path path(int node) const;
  // Ũ on all extension nodes
  Eigen::MatrixXd full_matrix() const;
  // Ũ on the embedded index set
  Eigen::MatrixXd restricted() const;
  // tree generator of Ũ, killing at the root
  Eigen::MatrixXd tree_generator() const;
};
TreeExtension minimal_tree_extension(const Eigen::MatrixXd& U);

// 𝒱(i) as I indices
std::vector<int> u_neighbors(const TreeExtension& ext, int i);
// ℬ(i) as extension nodes
std::vector<int> attraction_basin(const TreeExtension& ext, int i);

struct UltraGenerator {
  Eigen::MatrixXd Q;
  // added node -> (I index, P_k(X_τ = j))
  std::map<int, std::vector<std::pair<int, double>>> hitting;
  double inverse_residual = 0.0;  // max |(-Q)U - I|
  double asymmetry = 0.0;         // max |Q - Qᵀ|
  double max_row_sum = 0.0;
  double oracle_diff = 0.0;       // max |Q + U⁻¹|
  bool support_ok = true;         // Q_ij != 0 iff j ∈ 𝒱*(i)
  bool certified = false;
  std::string warning;
};
UltraGenerator ultrametric_generator(const TreeExtension& ext, const Eigen::MatrixXd& U);

struct HarmonicExtension {
  std::vector<double> values;     // per extension node
  double q_residual = 0.0;        // max |Qh| on I
  double tree_residual = 0.0;     // max |Q̃h̃| over added nodes
};
// h̃(k) = Σ_j P_k(X_τ = j) h(j); with check set, h must satisfy Qh = 0 on I
HarmonicExtension extend_harmonic(const TreeExtension& ext, const UltraGenerator& gen, const Eigen::VectorXd& h,
                                  bool check = true);

// random finite dendrogram matrix with at most max_indices indices
Eigen::MatrixXd random_dendrogram(Rng& rng, int max_indices);

// Infinite index sets of words: I = B*s over the alphabet, U_ij = w(N(i,j)).
struct WordFamily {
  std::vector<int> body;  // letters allowed before the terminal
  int terminal = 1;
  std::shared_ptr<const WeightSequence> w;
  std::string label;

  // letters that can follow a prefix, ascending
  std::vector<int> letters() const;
  bool contains(const Path& word) const;  // word given as letters
  double entry(const Path& a, const Path& b) const;
  // extension tree: type 0 added prefix, 1 member with children, 2 member leaf
  std::shared_ptr<const TreeSpec> extension_spec() const;
  static bool member_type(int t) { return t != 0; }
  // letter of the child with index k
  int letter(std::uint32_t k) const { return letters().at(k); }
};

struct H4Report {
  std::string status = "undetermined";
  double upper = 1.0;  // max escape-before-I probability over added node types
  double lower = 0.0;
  int depth = 0;
};
H4Report check_h4(const WordFamily& f, int max_level, double tol);

struct UBoundaryReport {
  bool structural_empty = false;  // no ≼-chain can be infinite
  bool empty_flag = false;
  Classification transience;
  H4Report h4;
  int resolution = 0;
  // (depth D, μ̃ of rays with no I node between the resolution level and D)
  std::vector<std::pair<int, double>> i_free_mass;
  double boundary_mass = 0.0;  // estimate of μ̃(∂ᵁ∞)
  struct Cylinder {
    Path prefix;
    double mass = 0.0;
    double i_free = 0.0;  // conditional I-free fraction at the deepest depth
  };
  std::vector<Cylinder> cylinders;
  bool lemma_consistent = true;  // H4 certified <=> μ̃(∂ᵁ∞) = 1
  std::string note;
};
UBoundaryReport u_boundary(const WordFamily& f, int resolution, const std::vector<int>& depths, double tol);

}  // namespace treepot
