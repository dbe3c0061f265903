#include "treepot/tree_core.hpp"

#include <algorithm>
#include <charconv>
#include <mutex>
#include <queue>

#include "treepot/error.hpp"

namespace treepot {

std::string path_string(const Path& p) {
  std::string s;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k) s += '.';
    s += std::to_string(p[k]);
  }
  return s;
}

Path parse_path(std::string_view s) {
  Path p;
  if (s.empty()) return p;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find('.', pos);
    if (end == std::string_view::npos) end = s.size();
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + end, v);
    if (ec != std::errc() || ptr != s.data() + end || end == pos)
      throw Error("bad_path", "tree_core", "malformed node path", {{"path", std::string(s)}});
    p.push_back(v);
    pos = end + 1;
  }
  return p;
}

int common_prefix(const Path& a, const Path& b) {
  std::size_t n = std::min(a.size(), b.size());
  std::size_t k = 0;
  while (k < n && a[k] == b[k]) ++k;
  return static_cast<int>(k);
}

bool is_prefix(const Path& a, const Path& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

// ---------------------------------------------------------------- TreeSpec

TreeSpec TreeSpec::finite(const std::vector<std::vector<int>>& children, std::vector<std::string> names) {
  const int n = static_cast<int>(children.size());
  if (n == 0) throw Error("malformed_spec", "tree_core", "finite tree needs at least a root");
  std::vector<int> parent(n, -1);
  for (int k = 0; k < n; ++k)
    for (int c : children[k]) {
      if (c <= 0 || c >= n)
        throw Error("malformed_spec", "tree_core", "child id out of range",
                    {{"node", std::to_string(k)}, {"child", std::to_string(c)}});
      if (parent[c] != -1)
        throw Error("malformed_spec", "tree_core", "node has two parents", {{"node", std::to_string(c)}});
      parent[c] = k;
    }
  TreeSpec s;
  s.kind_ = Kind::finite;
  s.label_ = "finite";
  s.allow_leaves_ = true;
  s.finite_levels_.assign(n, -1);
  s.finite_levels_[0] = 0;
  std::queue<int> q;
  q.push(0);
  int seen = 0;
  while (!q.empty()) {
    int k = q.front();
    q.pop();
    ++seen;
    s.depth_ = std::max(s.depth_, s.finite_levels_[k]);
    for (int c : children[k]) {
      if (s.finite_levels_[c] != -1) throw Error("malformed_spec", "tree_core", "cycle in child lists");
      s.finite_levels_[c] = s.finite_levels_[k] + 1;
      q.push(c);
    }
  }
  if (seen != n) throw Error("malformed_spec", "tree_core", "orphan nodes not reachable from the root");
  if (names.empty())
    for (int k = 0; k < n; ++k) names.push_back(std::to_string(k));
  if (static_cast<int>(names.size()) != n) throw Error("malformed_spec", "tree_core", "names/children size mismatch");
  s.names_ = std::move(names);
  for (int k = 0; k < n; ++k) {
    std::vector<ChildGroup> groups;
    for (int c : children[k]) groups.push_back({c, 1});
    s.rules_.push_back([groups](int) { return groups; });
  }
  return s;
}

TreeSpec TreeSpec::homogeneous(int p) {
  if (p < 2) throw Error("malformed_spec", "tree_core", "homogeneous tree needs p >= 2", {{"p", std::to_string(p)}});
  TreeSpec s;
  s.kind_ = Kind::homogeneous;
  s.label_ = "homogeneous p=" + std::to_string(p);
  s.names_ = {"root", "inner"};
  auto up = static_cast<std::uint64_t>(p);
  s.rules_.push_back([up](int) { return std::vector<ChildGroup>{{1, up + 1}}; });
  s.rules_.push_back([up](int) { return std::vector<ChildGroup>{{1, up}}; });
  return s;
}

TreeSpec TreeSpec::by_level(std::vector<std::uint64_t> counts, std::uint64_t tail) {
  if (tail == 0 || std::find(counts.begin(), counts.end(), 0u) != counts.end())
    throw Error("malformed_spec", "tree_core", "zero-child interior node in an infinite tree");
  TreeSpec s;
  s.kind_ = Kind::branching;
  s.label_ = "by-level";
  s.names_ = {"node"};
  s.rules_.push_back([counts, tail](int level) {
    std::uint64_t c = level < static_cast<int>(counts.size()) ? counts[level] : tail;
    return std::vector<ChildGroup>{{0, c}};
  });
  return s;
}

TreeSpec TreeSpec::by_branch(std::vector<std::uint64_t> branching) {
  if (branching.empty() || std::find(branching.begin(), branching.end(), 0u) != branching.end())
    throw Error("malformed_spec", "tree_core", "zero-child interior node in an infinite tree");
  TreeSpec s;
  s.kind_ = Kind::branching;
  s.label_ = "by-branch";
  s.names_ = {"root"};
  std::vector<ChildGroup> top;
  for (std::size_t c = 0; c < branching.size(); ++c) {
    top.push_back({static_cast<int>(c + 1), 1});
    s.names_.push_back("branch" + std::to_string(c));
  }
  s.rules_.push_back([top](int) { return top; });
  for (std::size_t c = 0; c < branching.size(); ++c) {
    int t = static_cast<int>(c + 1);
    std::uint64_t b = branching[c];
    s.rules_.push_back([t, b](int) { return std::vector<ChildGroup>{{t, b}}; });
  }
  return s;
}

TreeSpec TreeSpec::spine() {
  TreeSpec s;
  s.kind_ = Kind::branching;
  s.label_ = "spine";
  s.names_ = {"spine", "side"};
  s.rules_.push_back([](int) { return std::vector<ChildGroup>{{0, 1}, {1, 1}}; });
  s.rules_.push_back([](int level) {
    if (level + 1 >= 63) throw Error("depth_cap", "tree_core", "side-tree branching overflows at this level");
    return std::vector<ChildGroup>{{1, std::uint64_t{1} << (level + 1)}};
  });
  return s;
}

TreeSpec TreeSpec::typed(std::vector<std::string> names, std::vector<Rule> rules, int root_type, bool allow_leaves,
                         std::string label) {
  if (names.size() != rules.size() || root_type < 0 || root_type >= static_cast<int>(rules.size()))
    throw Error("malformed_spec", "tree_core", "typed tree: inconsistent type table");
  TreeSpec s;
  s.kind_ = Kind::typed;
  s.label_ = std::move(label);
  s.names_ = std::move(names);
  s.rules_ = std::move(rules);
  s.root_type_ = root_type;
  s.allow_leaves_ = allow_leaves;
  return s;
}

std::vector<ChildGroup> TreeSpec::children(int type, int level) const {
  auto g = rules_.at(type)(level);
  if (!allow_leaves_) {
    std::uint64_t total = 0;
    for (auto& c : g) total += c.count;
    if (total == 0)
      throw Error("malformed_spec", "tree_core", "zero-child interior node in an infinite tree",
                  {{"type", names_[type]}, {"level", std::to_string(level)}});
  }
  return g;
}

std::uint64_t TreeSpec::num_children(int type, int level) const {
  std::uint64_t n = 0;
  for (auto& g : children(type, level)) n += g.count;
  return n;
}

int TreeSpec::child_type(int type, int level, std::uint64_t index) const {
  for (auto& g : children(type, level)) {
    if (index < g.count) return g.type;
    index -= g.count;
  }
  throw Error("unrealized_node", "tree_core", "child index out of range",
              {{"type", names_.at(type)}, {"level", std::to_string(level)}});
}

// ---------------------------------------------------------------- RootedTree

RootedTree::RootedTree(std::shared_ptr<const TreeSpec> spec, int depth_cap) : spec_(std::move(spec)) {
  if (depth_cap < 0) throw Error("bad_argument", "tree_core", "depth cap must be nonnegative");
  nodes_.push_back({0, 0, spec_->root_type(), 0});
  realize(spec_->is_finite() ? spec_->depth() : depth_cap);
}

std::size_t RootedTree::size() const {
  std::shared_lock lock(mutex_);
  return nodes_.size();
}

void RootedTree::check(NodeId i) const {
  if (i >= nodes_.size())
    throw Error("unrealized_node", "tree_core", "node id not realized", {{"id", std::to_string(i)}});
}

int RootedTree::level(NodeId i) const {
  std::shared_lock lock(mutex_);
  check(i);
  return nodes_[i].level;
}

NodeId RootedTree::parent(NodeId i) const {
  std::shared_lock lock(mutex_);
  check(i);
  if (i == 0) throw Error("bad_argument", "tree_core", "the root has no parent in the tree");
  return nodes_[i].parent;
}

int RootedTree::type(NodeId i) const {
  std::shared_lock lock(mutex_);
  check(i);
  return nodes_[i].type;
}

Path RootedTree::path(NodeId i) const {
  std::shared_lock lock(mutex_);
  check(i);
  Path p(nodes_[i].level);
  while (i != 0) {
    p[nodes_[i].level - 1] = nodes_[i].index;
    i = nodes_[i].parent;
  }
  return p;
}

std::string RootedTree::name(NodeId i) const {
  if (spec_->is_finite()) return spec_->type_name(type(i));
  return path_string(path(i));
}

std::uint64_t RootedTree::num_children(NodeId i) const {
  int t, l;
  {
    std::shared_lock lock(mutex_);
    check(i);
    t = nodes_[i].type;
    l = nodes_[i].level;
  }
  return spec_->num_children(t, l);
}

NodeId RootedTree::child_locked(NodeId i, std::uint64_t index) {
  std::uint64_t key = (static_cast<std::uint64_t>(i) << 32) | index;
  auto it = child_of_.find(key);
  if (it != child_of_.end()) return it->second;
  const Node& n = nodes_[i];
  int t = spec_->child_type(n.type, n.level, index);
  NodeId id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back({i, n.level + 1, t, static_cast<std::uint32_t>(index)});
  child_of_.emplace(key, id);
  return id;
}

NodeId RootedTree::child(NodeId i, std::uint64_t index) {
  if (index >= (std::uint64_t{1} << 32))
    throw Error("depth_cap", "tree_core", "child index too large to realize");
  {
    std::shared_lock lock(mutex_);
    check(i);
    auto it = child_of_.find((static_cast<std::uint64_t>(i) << 32) | index);
    if (it != child_of_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  return child_locked(i, index);
}

std::vector<NodeId> RootedTree::children(NodeId i) {
  std::uint64_t n = num_children(i);
  std::vector<NodeId> out;
  out.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) out.push_back(child(i, k));
  return out;
}

NodeId RootedTree::find(const Path& p) {
  NodeId i = root();
  for (auto c : p) {
    if (c >= num_children(i))
      throw Error("unrealized_node", "tree_core", "path leaves the tree", {{"path", path_string(p)}});
    i = child(i, c);
  }
  return i;
}

std::vector<NodeId> RootedTree::level_nodes(int n) {
  if (n < 0) throw Error("bad_argument", "tree_core", "negative level");
  if (spec_->is_finite() && n > spec_->depth())
    throw Error("depth_cap", "tree_core", "level beyond the depth of a finite tree", {{"level", std::to_string(n)}});
  std::vector<NodeId> frontier{root()};
  for (int l = 0; l < n; ++l) {
    std::vector<NodeId> next;
    for (NodeId i : frontier) {
      auto c = children(i);
      next.insert(next.end(), c.begin(), c.end());
    }
    frontier.swap(next);
  }
  return frontier;
}

std::vector<NodeId> RootedTree::cylinder_atoms(int n) { return level_nodes(n); }

void RootedTree::realize(int n, std::size_t limit) {
  std::vector<NodeId> frontier{root()};
  std::size_t total = 1;
  for (int l = 0; l < n && !frontier.empty(); ++l) {
    std::vector<NodeId> next;
    for (NodeId i : frontier) {
      std::uint64_t c = num_children(i);
      total += c;
      if (total > limit)
        throw Error("depth_cap", "tree_core", "realization exceeds node limit",
                    {{"level", std::to_string(l + 1)}, {"limit", std::to_string(limit)}});
      for (std::uint64_t k = 0; k < c; ++k) next.push_back(child(i, k));
    }
    frontier.swap(next);
  }
}

bool RootedTree::is_ancestor(NodeId a, NodeId d) const {
  std::shared_lock lock(mutex_);
  check(a);
  check(d);
  while (nodes_[d].level > nodes_[a].level) d = nodes_[d].parent;
  return a == d;
}

NodeId RootedTree::meet(NodeId i, NodeId j) const {
  std::shared_lock lock(mutex_);
  check(i);
  check(j);
  while (nodes_[i].level > nodes_[j].level) i = nodes_[i].parent;
  while (nodes_[j].level > nodes_[i].level) j = nodes_[j].parent;
  while (i != j) {
    i = nodes_[i].parent;
    j = nodes_[j].parent;
  }
  return i;
}

std::vector<NodeId> RootedTree::geodesic(NodeId i, NodeId j) const {
  NodeId m = meet(i, j);
  std::shared_lock lock(mutex_);
  std::vector<NodeId> up, down;
  for (NodeId x = i; x != m; x = nodes_[x].parent) up.push_back(x);
  up.push_back(m);
  for (NodeId x = j; x != m; x = nodes_[x].parent) down.push_back(x);
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

// ---------------------------------------------------------------- BoundaryRay

BoundaryRay::BoundaryRay(Path prefix, Extender next) : prefix_(std::move(prefix)), next_(std::move(next)) {}

void BoundaryRay::extend(int n) {
  while (resolution() < n) {
    if (!next_)
      throw Error("depth_cap", "tree_core", "ray cannot be extended past its resolution",
                  {{"resolution", std::to_string(resolution())}, {"requested", std::to_string(n)}});
    prefix_.push_back(next_(prefix_));
  }
}

Path BoundaryRay::at(int n) {
  extend(n);
  return Path(prefix_.begin(), prefix_.begin() + n);
}

int path_type(const TreeSpec& spec, const Path& p) {
  int t = spec.root_type();
  for (std::size_t l = 0; l < p.size(); ++l) {
    if (p[l] >= spec.num_children(t, static_cast<int>(l)))
      throw Error("bad_path", "tree_core", "no such node", {{"path", path_string(p)}});
    t = spec.child_type(t, static_cast<int>(l), p[l]);
  }
  return t;
}

std::vector<TypedPath> enumerate_level(const TreeSpec& spec, int n, std::size_t limit) {
  std::vector<TypedPath> cur{{Path{}, spec.root_type()}};
  for (int l = 0; l < n; ++l) {
    std::vector<TypedPath> next;
    for (auto& tp : cur) {
      std::uint64_t idx = 0;
      for (auto& g : spec.children(tp.type, l)) {
        if (next.size() + g.count > limit)
          throw Error("depth_cap", "tree_core", "level too large to enumerate", {{"level", std::to_string(l + 1)}});
        for (std::uint64_t c = 0; c < g.count; ++c) {
          Path p = tp.path;
          p.push_back(static_cast<std::uint32_t>(idx + c));
          next.push_back({std::move(p), g.type});
        }
        idx += g.count;
      }
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace treepot
