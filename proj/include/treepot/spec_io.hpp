#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "treepot/tree_core.hpp"
#include "treepot/tree_matrix.hpp"
#include "treepot/ultrametric.hpp"
#include "treepot/weights.hpp"

namespace treepot {

// A tree/weights input file. Word-family files also carry the family.
struct LoadedSpec {
  std::string label;
  std::shared_ptr<const TreeSpec> tree;
  std::shared_ptr<const WeightSequence> weights;
  std::optional<WordFamily> words;
  RootMode mode = RootMode::absorbed;
  Path ray;  // default boundary ray, may be empty
  nlohmann::json raw;
};

LoadedSpec parse_spec(const nlohmann::json& j);
LoadedSpec load_spec(const std::string& path);
std::shared_ptr<const WeightSequence> parse_weights(const nlohmann::json& j);

// dense CSV; blank lines and lines starting with '#' are skipped
Eigen::MatrixXd load_matrix_csv(const std::string& path);

// directory of the bundled fixtures: $TREEPOT_FIXTURES, else the build-time default
std::string fixtures_dir();
// `path` as given when it exists, else looked up in the fixture directory
std::string resolve_input(const std::string& path);

// 17 significant digits, round-trip safe
std::string format_double(double v);

}  // namespace treepot
