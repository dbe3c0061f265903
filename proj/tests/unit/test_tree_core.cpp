#include <algorithm>

#include "common.hpp"
#include "treepot/error.hpp"
#include "treepot/tree_core.hpp"

using namespace treepot;

TEST_CASE("homogeneous tree node counts") {
  RootedTree t(std::make_shared<const TreeSpec>(TreeSpec::homogeneous(2)));
  t.realize(2);
  CHECK(t.size() == 10);
  CHECK(t.level_nodes(1).size() == 3);
  CHECK(t.cylinder_atoms(2).size() == 6);
  CHECK(t.cylinder_atoms(0).size() == 1);
  auto l1 = t.level_nodes(1);
  CHECK(t.geodesic(l1[0], l1[1]).size() == 3);
}

TEST_CASE("branching by level") {
  RootedTree t(std::make_shared<const TreeSpec>(TreeSpec::by_level({2}, 3)));
  CHECK(t.cylinder_atoms(2).size() == 6);
  RootedTree b(std::make_shared<const TreeSpec>(TreeSpec::by_level({}, 2)));
  CHECK(b.size() == 1);
  CHECK(b.num_children(b.root()) == 2);
}

TEST_CASE("F1 meets and geodesics") {
  auto s = testing::fixture("f1.json");
  RootedTree t(s.tree);
  t.realize(2);
  CHECK(t.size() == 5);
  const NodeId a = t.find({0}), b = t.find({1}), a1 = t.find({0, 0}), a2 = t.find({0, 1});
  CHECK(t.name(a1) == "a1");
  CHECK(t.is_leaf(b));
  CHECK(t.is_leaf(a1));
  CHECK(!t.is_leaf(a));
  CHECK(t.meet(a1, a2) == a);
  CHECK(t.meet(a1, b) == t.root());
  CHECK(t.meet(a, a1) == a);
  auto g = t.geodesic(a1, b);
  CHECK(g == std::vector<NodeId>{a1, a, t.root(), b});
  CHECK(t.geodesic(t.root(), t.root()) == std::vector<NodeId>{t.root()});
}

TEST_CASE("path strings round trip") {
  CHECK(path_string({}) == "");
  CHECK(path_string({1, 0, 12}) == "1.0.12");
  CHECK(parse_path("1.0.12") == Path{1, 0, 12});
  CHECK(parse_path("") == Path{});
  CHECK_THROWS_AS(parse_path("1..2"), Error);
  CHECK(common_prefix({0, 1, 2}, {0, 1, 3}) == 2);
  CHECK(is_prefix({0, 1}, {0, 1, 3}));
}

TEST_CASE("malformed finite trees are rejected") {
  CHECK_THROWS_AS(TreeSpec::finite({{1}, {0}}), Error);
  CHECK_THROWS_AS(TreeSpec::finite({{1, 1}, {}}), Error);
}

TEST_CASE("typed enumeration matches node counts") {
  auto lvl = enumerate_level(TreeSpec::homogeneous(3), 2);
  CHECK(lvl.size() == 12);
  CHECK(lvl.front().path == Path{0, 0});
  CHECK(path_type(TreeSpec::homogeneous(3), {2, 1}) == lvl.back().type);
}
