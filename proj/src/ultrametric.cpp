#include "treepot/ultrametric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include "treepot/error.hpp"

namespace treepot {

namespace {

void require_square(const Eigen::MatrixXd& U) {
  if (U.rows() != U.cols() || U.rows() == 0)
    throw Error("bad_matrix", "ultrametric", "matrix must be square and nonempty",
                {{"rows", std::to_string(U.rows())}, {"cols", std::to_string(U.cols())}});
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

}  // namespace

UltrametricCheck verify_ultrametric(const Eigen::MatrixXd& U) {
  require_square(U);
  const int n = static_cast<int>(U.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (U(i, j) != U(j, i))
        throw Error("asymmetric", "ultrametric", "matrix is not symmetric",
                    {{"i", std::to_string(i)}, {"j", std::to_string(j)}});
  UltrametricCheck c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!(U(i, j) > 0.0)) return {false, i, j, j, "positivity"};
      if (U(i, i) < U(i, j)) return {false, i, j, i, "diagonal"};
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double uij = U(i, j);
      for (int k = 0; k < n; ++k)
        if (uij < std::min(U(i, k), U(k, j))) return {false, i, j, k, "triangle"};
    }
  return c;
}

HypothesisReport check_hypotheses(const Eigen::MatrixXd& U) {
  auto v = verify_ultrametric(U);
  if (!v.ok)
    throw Error("not_ultrametric", "ultrametric", "matrix is not ultrametric",
                {{"i", std::to_string(v.i)}, {"j", std::to_string(v.j)}, {"k", std::to_string(v.k)}, {"reason", v.reason}});
  const int n = static_cast<int>(U.rows());
  HypothesisReport r;
  for (int i = 0; i < n && r.h1; ++i)
    for (int j = i + 1; j < n; ++j)
      if (U(i, i) == U(i, j) && U(j, j) == U(i, j)) {
        r.h1 = false;
        r.h1_i = i;
        r.h1_j = j;
        break;
      }
  std::set<double> vals(U.data(), U.data() + U.size());
  r.values.assign(vals.begin(), vals.end());
  r.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < r.values.size(); ++k) r.min_gap = std::min(r.min_gap, r.values[k] - r.values[k - 1]);
  if (r.values.size() < 2) r.min_gap = 0.0;
  for (double w : r.values) {
    UnionFind uf(n);
    int members = 0;
    for (int i = 0; i < n; ++i) {
      if (U(i, i) < w) continue;
      ++members;
      for (int j = i + 1; j < n; ++j)
        if (U(j, j) >= w && U(i, j) >= w) uf.unite(i, j);
    }
    std::set<int> roots;
    for (int i = 0; i < n; ++i)
      if (U(i, i) >= w) roots.insert(uf.find(i));
    r.class_counts.push_back(static_cast<int>(roots.size()));
    (void)members;
  }
  return r;
}

// ---------------------------------------------------------------- extension

int TreeExtension::meet(int a, int b) const {
  while (level[a] > level[b]) a = parent[a];
  while (level[b] > level[a]) b = parent[b];
  while (a != b) {
    a = parent[a];
    b = parent[b];
  }
  return a;
}

std::vector<int> TreeExtension::geodesic(int a, int b) const {
  int m = meet(a, b);
  std::vector<int> up, down;
  for (int x = a; x != m; x = parent[x]) up.push_back(x);
  for (int x = b; x != m; x = parent[x]) down.push_back(x);
  up.push_back(m);
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

Path TreeExtension::path(int node) const {
  Path p;
  for (int x = node; parent[x] >= 0; x = parent[x]) {
    const auto& sib = children[parent[x]];
    p.push_back(static_cast<std::uint32_t>(std::find(sib.begin(), sib.end(), x) - sib.begin()));
  }
  std::reverse(p.begin(), p.end());
  return p;
}

Eigen::MatrixXd TreeExtension::full_matrix() const {
  const int m = size();
  Eigen::MatrixXd M(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) M(a, b) = M(b, a) = u(a, b);
  return M;
}

Eigen::MatrixXd TreeExtension::restricted() const {
  const int n = num_indices();
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) M(i, j) = M(j, i) = u(embed[i], embed[j]);
  return M;
}

Eigen::MatrixXd TreeExtension::tree_generator() const {
  const int m = size();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(m, m);
  Q(0, 0) = -1.0 / value[0];
  for (int c = 1; c < m; ++c) {
    const int p = parent[c];
    const double rate = 1.0 / (value[c] - value[p]);
    Q(p, c) += rate;
    Q(c, p) += rate;
    Q(p, p) -= rate;
    Q(c, c) -= rate;
  }
  return Q;
}

TreeExtension minimal_tree_extension(const Eigen::MatrixXd& U) {
  auto hyp = check_hypotheses(U);
  if (!hyp.h1)
    throw Error("hypothesis", "ultrametric", "H1 fails: two indices are equivalent",
                {{"i", std::to_string(hyp.h1_i)}, {"j", std::to_string(hyp.h1_j)}});
  const int n = static_cast<int>(U.rows());
  TreeExtension ext;
  ext.values = hyp.values;
  ext.embed.assign(n, -1);
  std::vector<int> prev_node(n, -1);  // node of i at the previous value
  for (std::size_t k = 0; k < ext.values.size(); ++k) {
    const double w = ext.values[k];
    UnionFind uf(n);
    for (int i = 0; i < n; ++i) {
      if (U(i, i) < w) continue;
      for (int j = i + 1; j < n; ++j)
        if (U(j, j) >= w && U(i, j) >= w) uf.unite(i, j);
    }
    std::map<int, int> node_of_root;
    std::vector<int> cur(n, -1);
    for (int i = 0; i < n; ++i) {
      if (U(i, i) < w) continue;
      int r = uf.find(i);
      auto it = node_of_root.find(r);
      if (it == node_of_root.end()) {
        int id = ext.size();
        int par = k == 0 ? -1 : prev_node[i];
        ext.parent.push_back(par);
        ext.children.emplace_back();
        ext.level.push_back(static_cast<int>(k));
        ext.value.push_back(w);
        ext.cls.emplace_back();
        ext.member.push_back(-1);
        if (par >= 0) ext.children[par].push_back(id);
        it = node_of_root.emplace(r, id).first;
      }
      cur[i] = it->second;
      ext.cls[it->second].push_back(i);
      if (U(i, i) == w) {
        ext.embed[i] = it->second;
        ext.member[it->second] = i;
      }
    }
    if (k == 0 && node_of_root.size() != 1)
      throw Error("hypothesis", "ultrametric", "smallest value does not give a single class");
    prev_node = cur;
  }
  return ext;
}

std::vector<int> attraction_basin(const TreeExtension& ext, int i) {
  if (i < 0 || i >= ext.num_indices()) throw Error("bad_argument", "ultrametric", "index out of range");
  std::vector<int> out;
  std::vector<char> seen(ext.size(), 0);
  std::queue<int> q;
  q.push(ext.embed[i]);
  seen[ext.embed[i]] = 1;
  while (!q.empty()) {
    int x = q.front();
    q.pop();
    out.push_back(x);
    if (x != ext.embed[i] && !ext.added(x)) continue;  // a neighbor in I closes the branch
    std::vector<int> nb = ext.children[x];
    if (ext.parent[x] >= 0) nb.push_back(ext.parent[x]);
    for (int y : nb)
      if (!seen[y]) {
        seen[y] = 1;
        q.push(y);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> u_neighbors(const TreeExtension& ext, int i) {
  std::vector<int> out;
  for (int x : attraction_basin(ext, i))
    if (!ext.added(x) && ext.member[x] != i) out.push_back(ext.member[x]);
  std::sort(out.begin(), out.end());
  return out;
}

UltraGenerator ultrametric_generator(const TreeExtension& ext, const Eigen::MatrixXd& U) {
  const int n = ext.num_indices();
  if (U.rows() != n) throw Error("bad_matrix", "ultrametric", "matrix does not match the extension");
  const Eigen::MatrixXd Qt = ext.tree_generator();
  UltraGenerator g;
  g.Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int x = ext.embed[i];
    g.Q(i, i) += Qt(x, x);
  }
  // components of added nodes and the I nodes around them
  std::vector<int> comp(ext.size(), -1);
  for (int s = 0; s < ext.size(); ++s) {
    if (!ext.added(s) || comp[s] >= 0) continue;
    std::vector<int> nodes;
    std::set<int> border;  // I indices adjacent to the component
    std::queue<int> q;
    q.push(s);
    comp[s] = s;
    while (!q.empty()) {
      int x = q.front();
      q.pop();
      nodes.push_back(x);
      std::vector<int> nb = ext.children[x];
      if (ext.parent[x] >= 0) nb.push_back(ext.parent[x]);
      for (int y : nb) {
        if (!ext.added(y)) {
          border.insert(ext.member[y]);
        } else if (comp[y] < 0) {
          comp[y] = s;
          q.push(y);
        }
      }
    }
    std::vector<int> bl(border.begin(), border.end());
    const int c = static_cast<int>(nodes.size()), b = static_cast<int>(bl.size());
    Eigen::MatrixXd A(c, c), B = Eigen::MatrixXd::Zero(c, b);
    for (int r = 0; r < c; ++r) {
      for (int t = 0; t < c; ++t) A(r, t) = -Qt(nodes[r], nodes[t]);
      for (int t = 0; t < b; ++t) B(r, t) = Qt(nodes[r], ext.embed[bl[t]]);
    }
    Eigen::MatrixXd H = A.partialPivLu().solve(B);
    for (int r = 0; r < c; ++r) {
      auto& row = g.hitting[nodes[r]];
      for (int t = 0; t < b; ++t) row.push_back({bl[t], H(r, t)});
    }
    for (int i : bl) {
      const int xi = ext.embed[i];
      for (int r = 0; r < c; ++r) {
        const double rate = Qt(xi, nodes[r]);
        if (rate == 0.0) continue;
        for (int t = 0; t < b; ++t) g.Q(i, bl[t]) += rate * H(r, t);
      }
    }
  }
  // direct edges between I nodes
  for (int x = 1; x < ext.size(); ++x) {
    int p = ext.parent[x];
    if (ext.added(x) || ext.added(p)) continue;
    g.Q(ext.member[x], ext.member[p]) += Qt(x, p);
    g.Q(ext.member[p], ext.member[x]) += Qt(p, x);
  }
  // certification
  g.inverse_residual = ((-g.Q) * U - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  g.asymmetry = (g.Q - g.Q.transpose()).cwiseAbs().maxCoeff();
  g.max_row_sum = g.Q.rowwise().sum().maxCoeff();
  g.oracle_diff = (g.Q + U.inverse()).cwiseAbs().maxCoeff();
  for (int i = 0; i < n && g.support_ok; ++i) {
    auto nb = u_neighbors(ext, i);
    std::set<int> vs(nb.begin(), nb.end());
    vs.insert(i);
    for (int j = 0; j < n; ++j)
      if ((g.Q(i, j) != 0.0) != (vs.count(j) > 0)) {
        g.support_ok = false;
        break;
      }
  }
  g.certified = g.inverse_residual <= 1e-10 && g.asymmetry <= 1e-12 && g.max_row_sum <= 1e-12 && g.support_ok;
  if (!g.certified) g.warning = "generator failed certification";
  return g;
}

HarmonicExtension extend_harmonic(const TreeExtension& ext, const UltraGenerator& gen, const Eigen::VectorXd& h,
                                  bool check) {
  const int n = ext.num_indices();
  if (h.size() != n) throw Error("bad_argument", "ultrametric", "function size does not match the index set");
  HarmonicExtension r;
  r.q_residual = n ? (gen.Q * h).cwiseAbs().maxCoeff() : 0.0;
  if (check && r.q_residual > 1e-10)
    throw Error("not_harmonic", "ultrametric", "function is not Q-harmonic on I",
                {{"residual", std::to_string(r.q_residual)}});
  r.values.assign(ext.size(), 0.0);
  for (int i = 0; i < n; ++i) r.values[ext.embed[i]] = h(i);
  for (auto& [node, row] : gen.hitting) {
    double s = 0.0;
    for (auto& [j, p] : row) s += p * h(j);
    r.values[node] = s;
  }
  const Eigen::MatrixXd Qt = ext.tree_generator();
  Eigen::VectorXd hv = Eigen::Map<const Eigen::VectorXd>(r.values.data(), ext.size());
  Eigen::VectorXd qh = Qt * hv;
  for (int x = 0; x < ext.size(); ++x)
    if (ext.added(x)) r.tree_residual = std::max(r.tree_residual, std::abs(qh(x)));
  return r;
}

Eigen::MatrixXd random_dendrogram(Rng& rng, int max_indices) {
  const int nodes = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * max_indices)));
  std::vector<int> parent(nodes, -1), depth(nodes, 0);
  std::vector<double> height(nodes);
  height[0] = 0.5 + rng.uniform();
  for (int k = 1; k < nodes; ++k) {
    parent[k] = static_cast<int>(rng.below(k));
    depth[k] = depth[parent[k]] + 1;
    // integer steps make equal heights on different branches common
    height[k] = height[parent[k]] + 1.0 + static_cast<double>(rng.below(3));
  }
  std::vector<int> ids(nodes);
  std::iota(ids.begin(), ids.end(), 0);
  for (int k = nodes - 1; k > 0; --k) std::swap(ids[k], ids[rng.below(k + 1)]);
  const int n = 1 + static_cast<int>(rng.below(std::min(nodes, max_indices)));
  ids.resize(n);
  auto meet = [&](int a, int b) {
    while (depth[a] > depth[b]) a = parent[a];
    while (depth[b] > depth[a]) b = parent[b];
    while (a != b) {
      a = parent[a];
      b = parent[b];
    }
    return a;
  };
  Eigen::MatrixXd U(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) U(i, j) = U(j, i) = height[meet(ids[i], ids[j])];
  return U;
}

// ---------------------------------------------------------------- word families

std::vector<int> WordFamily::letters() const {
  std::set<int> s(body.begin(), body.end());
  s.insert(terminal);
  return {s.begin(), s.end()};
}

bool WordFamily::contains(const Path& word) const {
  if (word.empty() || static_cast<int>(word.back()) != terminal) return false;
  for (std::size_t k = 0; k + 1 < word.size(); ++k)
    if (std::find(body.begin(), body.end(), static_cast<int>(word[k])) == body.end()) return false;
  return true;
}

double WordFamily::entry(const Path& a, const Path& b) const {
  if (!contains(a) || !contains(b)) throw Error("bad_argument", "ultrametric", "word outside the index set");
  return w->w(common_prefix(a, b));
}

std::shared_ptr<const TreeSpec> WordFamily::extension_spec() const {
  if (body.empty()) throw Error("bad_spec", "ultrametric", "word family needs a nonempty body alphabet");
  const auto ls = letters();
  const bool term_in_body = std::find(body.begin(), body.end(), terminal) != body.end();
  std::vector<ChildGroup> groups;
  for (int l : ls) {
    if (l == terminal)
      groups.push_back({term_in_body ? 1 : 2, 1});
    else
      groups.push_back({0, 1});
  }
  TreeSpec::Rule inner = [groups](int) { return groups; };
  TreeSpec::Rule leaf = [](int) { return std::vector<ChildGroup>{}; };
  return std::make_shared<const TreeSpec>(
      TreeSpec::typed({"added", "member", "terminal"}, {inner, inner, leaf}, 0, !term_in_body, label));
}

H4Report check_h4(const WordFamily& f, int max_level, double tol) {
  auto spec = f.extension_spec();
  const WeightSequence& w = *f.w;
  H4Report r;
  // escape into the own subtree before the parent or an I node; side 0 kills at depth, side 1 escapes there
  for (int D : {64, 1024, 16384, 262144, 1048576}) {
    if (D <= max_level) continue;
    double e[2] = {0.0, 1.0};
    double up_max[2] = {0.0, 0.0};
    for (int L = D - 1; L >= 0; --L) {
      double ne[2];
      for (int s = 0; s < 2; ++s) {
        double se = 0.0, sk = 0.0;
        for (auto& g : spec->children(0, L)) {
          if (g.type == 0)
            se += static_cast<double>(g.count) * e[s];
          else
            sk += static_cast<double>(g.count);
        }
        const double inv = 1.0 / w.delta(L + 1);
        se *= inv;
        sk *= inv;
        const double up = L > 0 ? 1.0 / w.delta(L) : 1.0 / w.w(0);
        ne[s] = se / (up + se + sk);
        if (L <= max_level) up_max[s] = std::max(up_max[s], ne[s]);
      }
      e[0] = ne[0];
      e[1] = ne[1];
    }
    r.lower = up_max[0];
    r.upper = up_max[1];
    r.depth = D;
    if (r.upper <= tol) {
      r.status = "certified";
      return r;
    }
    if (r.lower > tol) {
      r.status = "refuted";
      return r;
    }
  }
  return r;
}

UBoundaryReport u_boundary(const WordFamily& f, int resolution, const std::vector<int>& depths, double tol) {
  if (depths.empty()) throw Error("bad_argument", "ultrametric", "no depths given");
  const int Dmax = *std::max_element(depths.begin(), depths.end());
  if (resolution < 0 || resolution >= Dmax)
    throw Error("resolution", "ultrametric", "resolution must lie below the deepest tested depth");
  if (Dmax > 512) throw Error("depth_cap", "ultrametric", "tested depth beyond the cap of 512");
  auto spec = f.extension_spec();
  UBoundaryReport r;
  r.resolution = resolution;
  r.structural_empty = std::find(f.body.begin(), f.body.end(), f.terminal) == f.body.end();
  r.transience = classify_transience(spec, f.w, default_schedule(), 1e-9);
  r.h4 = check_h4(f, resolution, 1e-5);
  if (r.transience.status != Classification::Status::transient) {
    r.empty_flag = r.structural_empty;
    r.note = "extension chain not certified transient; the exit measure is undefined";
    return r;
  }
  ChainAnalysis a(spec, f.w, RootMode::absorbed, Dmax + 1);
  const int T = spec->num_types();
  auto split = [&](int t, int L) {
    // probability that the exit ray enters each child type
    std::vector<double> p(T, 0.0);
    double tot = 0.0;
    for (auto& g : spec->children(t, L)) {
      double e = a.escape(g.type, L + 1).mid() * static_cast<double>(g.count);
      p[g.type] += e;
      tot += e;
    }
    if (tot > 0)
      for (auto& x : p) x /= tot;
    return p;
  };
  // type distribution of the exit ray at the resolution level
  std::vector<double> pi(T, 0.0);
  pi[spec->root_type()] = 1.0;
  for (int L = 0; L < resolution; ++L) {
    std::vector<double> next(T, 0.0);
    for (int t = 0; t < T; ++t)
      if (pi[t] > 0) {
        auto p = split(t, L);
        for (int u = 0; u < T; ++u) next[u] += pi[t] * p[u];
      }
    pi = next;
  }
  std::vector<double> a_res;
  for (int D : depths) {
    if (D <= resolution) continue;
    std::vector<double> av(T);
    for (int t = 0; t < T; ++t) av[t] = WordFamily::member_type(t) ? 0.0 : 1.0;
    for (int L = D - 1; L >= resolution; --L) {
      std::vector<double> nv(T, 0.0);
      for (int t = 0; t < T; ++t) {
        if (WordFamily::member_type(t)) continue;
        auto p = split(t, L);
        for (int u = 0; u < T; ++u) nv[t] += p[u] * av[u];
      }
      av = nv;
    }
    double m = 0.0;
    for (int t = 0; t < T; ++t) m += pi[t] * av[t];
    r.i_free_mass.push_back({D, m});
    if (D == Dmax) a_res = av;
  }
  for (auto& tp : enumerate_level(*spec, resolution, 100000)) {
    double m = a.mass(tp.path).mid();
    if (m <= 0.0) continue;
    r.cylinders.push_back({tp.path, m, a_res[tp.type]});
  }
  const double free_mass = r.i_free_mass.back().second;
  r.boundary_mass = r.structural_empty ? 0.0 : 1.0 - free_mass;
  r.empty_flag = r.structural_empty || r.boundary_mass <= tol;
  const bool full = r.boundary_mass >= 1.0 - tol;
  if (r.h4.status == "undetermined") {
    r.lemma_consistent = true;
    r.note = "H4 undetermined; equivalence with full boundary mass not tested";
  } else {
    r.lemma_consistent = (r.h4.status == "certified") == full;
    r.note = r.lemma_consistent ? "H4 status agrees with the boundary mass"
                                : "H4 status and the boundary mass disagree: H4 " + r.h4.status +
                                      ", boundary mass " + std::to_string(r.boundary_mass);
  }
  return r;
}

}  // namespace treepot
