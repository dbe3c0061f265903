#include "treepot/tree_matrix.hpp"

#include <algorithm>
#include <cmath>

#include "treepot/error.hpp"

namespace treepot {

const char* to_string(RootMode m) { return m == RootMode::absorbed ? "absorbed" : "reflected"; }

RootMode parse_root_mode(const std::string& s) {
  if (s == "absorbed") return RootMode::absorbed;
  if (s == "reflected") return RootMode::reflected;
  throw Error("bad_argument", "tree_matrix", "mode must be absorbed or reflected", {{"mode", s}});
}

// ---------------------------------------------------------------- U entries

double TreeMatrixView::entry(NodeId i, NodeId j) const { return w_.w(tree_.level(tree_.meet(i, j))); }

double TreeMatrixView::entry(NodeId i, const Path& ray) const {
  Path p = tree_.path(i);
  if (ray.size() < p.size() && is_prefix(ray, p))
    throw Error("resolution", "tree_matrix", "ray resolution below the node level",
                {{"node", path_string(p)}, {"ray", path_string(ray)}});
  return w_.w(common_prefix(p, ray));
}

double TreeMatrixView::entry(const Path& a, const Path& b) const {
  int k = common_prefix(a, b);
  if (k < static_cast<int>(std::min(a.size(), b.size()))) return w_.w(k);
  if (w_.is_bounded()) return w_.limit();
  throw Error("diagonal_at_infinity", "tree_matrix", "rays agree on their whole resolution and w is unbounded",
              {{"a", path_string(a)}, {"b", path_string(b)}});
}

// ---------------------------------------------------------------- generator

std::vector<NodeId> window_nodes(RootedTree& tree, int depth) {
  std::vector<NodeId> out{tree.root()};
  std::vector<NodeId> frontier{tree.root()};
  int max_depth = tree.spec().is_finite() ? std::min(depth, tree.spec().depth()) : depth;
  for (int l = 0; l < max_depth; ++l) {
    std::vector<NodeId> next;
    for (NodeId i : frontier) {
      auto c = tree.children(i);
      next.insert(next.end(), c.begin(), c.end());
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier.swap(next);
  }
  return out;
}

SparseGenerator build_generator(RootedTree& tree, const WeightSequence& w, RootMode mode, int depth) {
  SparseGenerator g;
  g.mode = mode;
  g.nodes = window_nodes(tree, depth);
  g.kill_rate = mode == RootMode::absorbed ? 1.0 / w.w(0) : 0.0;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    NodeId i = g.nodes[k];
    g.index[i] = static_cast<int>(k);
    int l = tree.level(i);
    double up = i == tree.root() ? 0.0 : 1.0 / w.delta(l);
    std::uint64_t nc = tree.num_children(i);
    double down = nc ? 1.0 / w.delta(l + 1) : 0.0;
    g.up_rate.push_back(up);
    g.child_rate.push_back(down);
    double out = up + static_cast<double>(nc) * down + (i == tree.root() ? g.kill_rate : 0.0);
    g.diag.push_back(-out);
  }
  return g;
}

double SparseGenerator::rate(NodeId i, NodeId j, const RootedTree& tree) const {
  auto it = index.find(i);
  if (it == index.end()) throw Error("unrealized_node", "tree_matrix", "row outside the generator window");
  int k = it->second;
  if (i == j) return diag[k];
  if (i != tree.root() && tree.parent(i) == j) return up_rate[k];
  if (j != tree.root() && tree.parent(j) == i) return child_rate[k];
  return 0.0;
}

double SparseGenerator::row_sum(int k, const RootedTree& tree) const {
  NodeId i = nodes[k];
  double s = diag[k] + up_rate[k] + static_cast<double>(tree.num_children(i)) * child_rate[k];
  return s;
}

Eigen::MatrixXd SparseGenerator::dense(const RootedTree& tree) const {
  const int n = static_cast<int>(nodes.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    q(k, k) = diag[k];
    if (nodes[k] == tree.root()) continue;
    auto it = index.find(tree.parent(nodes[k]));
    if (it == index.end()) continue;
    q(k, it->second) = up_rate[k];
    q(it->second, k) = child_rate[it->second];
  }
  return q;
}

double inverse_residual(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& node_set) {
  TreeMatrixView u(tree, w);
  const double kill = 1.0 / w.w(0);
  double worst = 0.0;
  for (NodeId i : node_set) {
    int l = tree.level(i);
    double up = i == tree.root() ? 0.0 : 1.0 / w.delta(l);
    auto kids = tree.children(i);
    double down = kids.empty() ? 0.0 : 1.0 / w.delta(l + 1);
    double out = up + down * static_cast<double>(kids.size()) + (i == tree.root() ? kill : 0.0);
    for (NodeId j : node_set) {
      // ((-Q)U)_{ij}, summing the nonzero entries of row i
      double s = out * u.entry(i, j);
      if (i != tree.root()) s -= up * u.entry(tree.parent(i), j);
      for (NodeId c : kids) s -= down * u.entry(c, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------- potentials

namespace {

// LDLᵗ of the tree-supported matrix -Q on a window listed parents-first
struct TreeFactor {
  std::vector<int> parent;
  std::vector<double> a;  // (-Q)_{k, parent(k)}
  std::vector<double> d;  // pivots after eliminating the subtree below k

  TreeFactor(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& window, RootMode mode) {
    const int n = static_cast<int>(window.size());
    std::unordered_map<NodeId, int> index;
    for (int k = 0; k < n; ++k) index[window[k]] = k;
    parent.assign(n, -1);
    a.assign(n, 0.0);
    d.assign(n, 0.0);
    for (int k = 0; k < n; ++k) {
      NodeId i = window[k];
      int l = tree.level(i);
      double up = 0.0;
      if (i != tree.root()) {
        auto it = index.find(tree.parent(i));
        if (it == index.end() || it->second >= k)
          throw Error("bad_argument", "tree_matrix", "window must be prefix-closed and listed parents first");
        parent[k] = it->second;
        up = 1.0 / w.delta(l);
        a[k] = -up;
      }
      std::uint64_t nc = tree.num_children(i);
      double out = up + (nc ? static_cast<double>(nc) / w.delta(l + 1) : 0.0);
      if (i == tree.root() && mode == RootMode::absorbed) out += 1.0 / w.w(0);
      d[k] = out;
    }
    for (int k = n - 1; k >= 1; --k) {
      if (!(d[k] > 0)) throw Error("singular", "tree_matrix", "singular restriction of the generator");
      d[parent[k]] -= a[k] * a[k] / d[k];
    }
    if (!(d[0] > 1e-300)) throw Error("singular", "tree_matrix", "singular restriction of the generator");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const int n = static_cast<int>(d.size());
    Eigen::VectorXd y = b;
    for (int k = n - 1; k >= 1; --k) y[parent[k]] -= a[k] / d[k] * y[k];
    Eigen::VectorXd x(n);
    x[0] = y[0] / d[0];
    for (int k = 1; k < n; ++k) x[k] = (y[k] - a[k] * x[parent[k]]) / d[k];
    return x;
  }
};

}  // namespace

Eigen::VectorXd tree_solve(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& window,
                           const Eigen::VectorXd& b, RootMode mode) {
  return TreeFactor(tree, w, window, mode).solve(b);
}

NodeMatrix finite_potential(RootedTree& tree, const WeightSequence& w, int n) {
  if (n < 0) throw Error("bad_argument", "tree_matrix", "negative truncation level");
  NodeMatrix out;
  out.rows = window_nodes(tree, n);
  out.cols = out.rows;
  TreeFactor f(tree, w, out.rows, RootMode::absorbed);
  const int m = static_cast<int>(out.rows.size());
  out.m.resize(m, m);
  for (int j = 0; j < m; ++j) out.m.col(j) = f.solve(Eigen::VectorXd::Unit(m, j));
  return out;
}

NodeMatrix finite_potential_dense(RootedTree& tree, const WeightSequence& w, int n) {
  NodeMatrix out;
  auto g = build_generator(tree, w, RootMode::absorbed, n);
  out.rows = g.nodes;
  out.cols = g.nodes;
  out.m = (-g.dense(tree)).inverse();
  return out;
}

NodeMatrix u_block(RootedTree& tree, const WeightSequence& w, const std::vector<NodeId>& rows,
                   const std::vector<NodeId>& cols) {
  TreeMatrixView u(tree, w);
  NodeMatrix out{rows, cols, Eigen::MatrixXd(rows.size(), cols.size())};
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out.m(a, b) = u.entry(rows[a], cols[b]);
  return out;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  int r = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k)
    if (svd.singularValues()[k] > tol) ++r;
  return r;
}

HarmonicDecomposition harmonic_decomposition(RootedTree& tree, const WeightSequence& w, int n) {
  HarmonicDecomposition hd;
  hd.V = finite_potential(tree, w, n);
  const auto& nodes = hd.V.rows;
  auto U = u_block(tree, w, nodes, nodes);
  hd.H = {nodes, nodes, U.m - hd.V.m};
  for (NodeId i : nodes)
    if (tree.level(i) == n && tree.num_children(i) > 0) hd.boundary.push_back(i);
  hd.rank = numerical_rank(hd.H.m, 1e-8);

  auto g = build_generator(tree, w, RootMode::absorbed, n);
  Eigen::MatrixXd QH = g.dense(tree) * hd.H.m;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (std::find(hd.boundary.begin(), hd.boundary.end(), nodes[k]) != hd.boundary.end()) continue;
    hd.harmonic_residual = std::max(hd.harmonic_residual, QH.row(k).cwiseAbs().maxCoeff());
  }
  return hd;
}

HittingMatrices hitting_matrices(RootedTree& tree, const WeightSequence& w, int n) {
  auto hd = harmonic_decomposition(tree, w, n);
  if (hd.boundary.empty())
    throw Error("bad_argument", "tree_matrix", "no level-n node has children", {{"n", std::to_string(n)}});
  const auto& In = hd.V.rows;
  std::vector<NodeId> next;
  for (NodeId k : hd.boundary)
    for (NodeId c : tree.children(k)) next.push_back(c);

  HittingMatrices hm;
  auto UIB = u_block(tree, w, In, hd.boundary);
  auto UBB = u_block(tree, w, hd.boundary, hd.boundary);
  hm.W = {In, hd.boundary, UBB.m.transpose().ldlt().solve(UIB.m.transpose()).transpose()};

  auto UIN = u_block(tree, w, In, next);
  auto UNN = u_block(tree, w, next, next);
  hm.E = {In, next, UNN.m.ldlt().solve(UIN.m.transpose()).transpose()};

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(hd.boundary.size(), next.size());
  for (std::size_t a = 0; a < hd.boundary.size(); ++a)
    for (std::size_t b = 0; b < next.size(); ++b)
      if (tree.parent(next[b]) == hd.boundary[a]) M(a, b) = 1.0;
  hm.D = {In, hd.boundary, hm.E.m * M.transpose()};

  auto UBI = u_block(tree, w, hd.boundary, In);
  hm.reconstruction_residual = (hd.H.m - hm.D.m * UBI.m).cwiseAbs().maxCoeff();
  return hm;
}

}  // namespace treepot
