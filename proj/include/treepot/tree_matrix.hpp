#pragma once

#include <Eigen/Dense>
#include <unordered_map>
#include <vector>

#include "treepot/tree_core.hpp"
#include "treepot/weights.hpp"

namespace treepot {

enum class RootMode { absorbed, reflected };

const char* to_string(RootMode m);
RootMode parse_root_mode(const std::string& s);

// U_ij = w_{|i^j|}, also between nodes and boundary rays.
class TreeMatrixView {
 public:
  TreeMatrixView(RootedTree& tree, const WeightSequence& w) : tree_(tree), w_(w) {}
  double entry(NodeId i, NodeId j) const;
  double entry(NodeId i, const Path& ray) const;
  // two rays; if they agree on their whole common resolution the diagonal value lim w_n is
  // returned for bounded weights, otherwise the call fails
  double entry(const Path& a, const Path& b) const;
  const WeightSequence& weights() const { return w_; }
  RootedTree& tree() const { return tree_; }

 private:
  RootedTree& tree_;
  const WeightSequence& w_;
};

// Tree-supported q-matrix on a realized window. Rows of nodes on the window's
// last level still account for the rates to their (unlisted) children.
struct SparseGenerator {
  RootMode mode = RootMode::absorbed;
  std::vector<NodeId> nodes;
  std::unordered_map<NodeId, int> index;
  std::vector<double> diag;     // Q_ii
  std::vector<double> up_rate;  // Q_{i i^-}, zero at the root
  std::vector<double> child_rate;  // Q_{i c} for every child c
  double kill_rate = 0.0;          // Q_{r ∂r}

  double rate(NodeId i, NodeId j, const RootedTree& tree) const;
  double row_sum(int k, const RootedTree& tree) const;
  // dense restriction to the window
  Eigen::MatrixXd dense(const RootedTree& tree) const;
};

// nodes with level <= depth, canonical (level, path) order
std::vector<NodeId> window_nodes(RootedTree& tree, int depth);

SparseGenerator build_generator(RootedTree& tree, const WeightSequence& w, RootMode mode, int depth);

// max |((-Q)U - I)_{ij}| over rows and columns in node_set; neighbors are realized on demand
double inverse_residual(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& node_set);

struct NodeMatrix {
  std::vector<NodeId> rows;
  std::vector<NodeId> cols;
  Eigen::MatrixXd m;
};

// V⁽ⁿ⁾ = -(Q on Iⁿ)^{-1}, by leaf-to-root elimination on the tree
NodeMatrix finite_potential(RootedTree& tree, const WeightSequence& w, int n);
// the same through a dense inverse; test oracle
NodeMatrix finite_potential_dense(RootedTree& tree, const WeightSequence& w, int n);
// solve (-Q_{IⁿIⁿ}) x = b on the window in linear time
Eigen::VectorXd tree_solve(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& window,
                           const Eigen::VectorXd& b, RootMode mode = RootMode::absorbed);

NodeMatrix u_block(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& rows,
                   const std::vector<NodeId>& cols);

struct HarmonicDecomposition {
  NodeMatrix V;
  NodeMatrix H;
  int rank = 0;
  std::vector<NodeId> boundary;  // B̃ⁿ: level-n nodes with children
  double harmonic_residual = 0;  // max |(Q̄⁽ⁿ⁾H)_{ij}| over rows outside B̃ⁿ
};

HarmonicDecomposition harmonic_decomposition(RootedTree& tree, const WeightSequence& w, int n);

struct HittingMatrices {
  NodeMatrix W;  // P_i{X at T_{B̃ⁿ} = k}
  NodeMatrix E;  // against Bⁿ⁺¹
  NodeMatrix D;  // E Mᵗ
  double reconstruction_residual = 0;  // max |H - D U_{B̃ⁿ,Iⁿ}|
};

HittingMatrices hitting_matrices(RootedTree& tree, const WeightSequence& w, int n);

int numerical_rank(const Eigen::MatrixXd& m, double tol);

}  // namespace treepot
