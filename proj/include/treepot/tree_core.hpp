#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace treepot {

// Child-index path from the root; the empty path is the root.
using Path = std::vector<std::uint32_t>;

std::string path_string(const Path& p);
Path parse_path(std::string_view s);
// length of the common prefix, i.e. the level of the meet
int common_prefix(const Path& a, const Path& b);
bool is_prefix(const Path& a, const Path& b);

// A run of `count` consecutive children sharing one subtree type.
struct ChildGroup {
  int type = 0;
  std::uint64_t count = 0;
};

// Trees are described by a type graph: two nodes with the same type at the
// same level root isomorphic subtrees. Finite trees use one type per node.
class TreeSpec {
 public:
  enum class Kind { finite, branching, homogeneous, typed };
  using Rule = std::function<std::vector<ChildGroup>(int level)>;

  // children[k] lists the node indices of the children of node k; node 0 is the root.
  static TreeSpec finite(const std::vector<std::vector<int>>& children,
                         std::vector<std::string> names = {});
  // root degree p+1, every other node has p children
  static TreeSpec homogeneous(int p);
  // counts[l] children for nodes at level l, `tail` beyond
  static TreeSpec by_level(std::vector<std::uint64_t> counts, std::uint64_t tail);
  // root has one child per entry; the subtree below child c is `branching[c]`-ary
  static TreeSpec by_branch(std::vector<std::uint64_t> branching);
  // a distinguished ray whose node at level k also carries a subtree root;
  // subtree nodes at level L have 2^(L+1) children
  static TreeSpec spine();
  static TreeSpec typed(std::vector<std::string> names, std::vector<Rule> rules, int root_type,
                        bool allow_leaves, std::string label = "typed");

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  bool is_finite() const { return kind_ == Kind::finite; }
  // deepest level of a finite tree
  int depth() const { return depth_; }
  int root_type() const { return root_type_; }
  int num_types() const { return static_cast<int>(rules_.size()); }
  const std::string& type_name(int t) const { return names_.at(t); }
  bool allows_leaves() const { return allow_leaves_; }

  std::vector<ChildGroup> children(int type, int level) const;
  std::uint64_t num_children(int type, int level) const;
  int child_type(int type, int level, std::uint64_t index) const;

  // for finite trees: the level of node k and its node name
  int finite_level(int node) const { return finite_levels_.at(node); }

 private:
  Kind kind_ = Kind::typed;
  std::string label_;
  std::vector<std::string> names_;
  std::vector<Rule> rules_;
  int root_type_ = 0;
  bool allow_leaves_ = false;
  int depth_ = -1;
  std::vector<int> finite_levels_;
};

// type of the node at `p`
int path_type(const TreeSpec& spec, const Path& p);

struct TypedPath {
  Path path;
  int type;
};
// every level-n node in canonical order; fails beyond `limit` nodes
std::vector<TypedPath> enumerate_level(const TreeSpec& spec, int n, std::size_t limit = 1000000);

using NodeId = std::uint32_t;

// Realized, prefix-closed portion of a tree. Children are realized on demand,
// so NodeIds stay valid forever. Thread-safe.
class RootedTree {
 public:
  explicit RootedTree(std::shared_ptr<const TreeSpec> spec, int depth_cap = 0);

  const TreeSpec& spec() const { return *spec_; }
  std::shared_ptr<const TreeSpec> spec_ptr() const { return spec_; }
  NodeId root() const { return 0; }
  std::size_t size() const;

  int level(NodeId i) const;
  NodeId parent(NodeId i) const;
  int type(NodeId i) const;
  Path path(NodeId i) const;
  std::string name(NodeId i) const;
  std::uint64_t num_children(NodeId i) const;
  bool is_leaf(NodeId i) const { return num_children(i) == 0; }

  NodeId child(NodeId i, std::uint64_t index);
  std::vector<NodeId> children(NodeId i);
  NodeId find(const Path& p);
  // all nodes of level n in canonical (lexicographic path) order
  std::vector<NodeId> level_nodes(int n);
  // Bⁿ as the index set of the level-n cylinder partition
  std::vector<NodeId> cylinder_atoms(int n);
  // realize every node up to level n; refuses when more than `limit` nodes would be needed
  void realize(int n, std::size_t limit = 2000000);

  bool is_ancestor(NodeId a, NodeId d) const;
  NodeId meet(NodeId i, NodeId j) const;
  std::vector<NodeId> geodesic(NodeId i, NodeId j) const;

 private:
  struct Node {
    NodeId parent;
    int level;
    int type;
    std::uint32_t index;
  };
  NodeId child_locked(NodeId i, std::uint64_t index);
  void check(NodeId i) const;

  std::shared_ptr<const TreeSpec> spec_;
  mutable std::shared_mutex mutex_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, NodeId> child_of_;
};

// A boundary point known to a finite resolution, extendable on demand.
class BoundaryRay {
 public:
  using Extender = std::function<std::uint32_t(const Path& prefix)>;
  explicit BoundaryRay(Path prefix, Extender next = nullptr);

  int resolution() const { return static_cast<int>(prefix_.size()); }
  const Path& prefix() const { return prefix_; }
  // the level-n node ξ(n) as a path; extends the ray if needed
  Path at(int n);
  void extend(int n);

 private:
  Path prefix_;
  Extender next_;
};

}  // namespace treepot
