#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "treepot/rng.hpp"
#include "treepot/tree_core.hpp"
#include "treepot/weights.hpp"

namespace treepot {

// random finite tree with 2..max_nodes nodes and random increasing weights
struct RandomTree {
  std::shared_ptr<const TreeSpec> spec;
  std::shared_ptr<const WeightSequence> w;
};
RandomTree random_finite_tree(Rng& rng, int max_nodes);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
  std::vector<std::pair<std::string, double>> metrics;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240607;
  std::uint64_t paths = 100000;
};

// criteria 1..10
CriterionResult run_criterion(int id, const AcceptanceOptions& opt = {});
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt = {});
constexpr int kNumCriteria = 10;

}  // namespace treepot
