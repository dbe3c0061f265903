#include "treepot/spec_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "treepot/error.hpp"

#ifndef TREEPOT_DEFAULT_FIXTURES
#define TREEPOT_DEFAULT_FIXTURES "fixtures"
#endif

namespace treepot {

using nlohmann::json;

namespace {

template <class T>
T get(const json& j, const char* key) {
  if (!j.contains(key)) throw Error("schema", "cli", std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error("schema", "cli", std::string("bad field '") + key + "'", {{"detail", e.what()}});
  }
}

}  // namespace

std::shared_ptr<const WeightSequence> parse_weights(const json& j) {
  const auto kind = get<std::string>(j, "kind");
  WeightSequence w = [&] {
    if (kind == "finite") return WeightSequence::finite(get<std::vector<double>>(j, "w"));
    if (kind == "arithmetic") return WeightSequence::arithmetic(get<std::vector<double>>(j, "prefix"), get<double>(j, "step"));
    if (kind == "geometric_gap")
      return WeightSequence::geometric_gap(get<std::vector<double>>(j, "prefix"), get<double>(j, "rho"));
    if (kind == "bounded") return WeightSequence::bounded(get<double>(j, "limit"), get<double>(j, "c"), get<double>(j, "rho"));
    if (kind == "gap_ratio")
      return WeightSequence::gap_ratio(get<double>(j, "w0"), get<double>(j, "delta1"), get<double>(j, "a"), get<double>(j, "b"));
    throw Error("schema", "cli", "unknown weights kind", {{"kind", kind}});
  }();
  return std::make_shared<const WeightSequence>(std::move(w));
}

LoadedSpec parse_spec(const json& j) {
  if (!j.is_object()) throw Error("schema", "cli", "spec must be a JSON object");
  LoadedSpec s;
  s.raw = j;
  s.label = j.value("label", std::string("spec"));
  if (j.contains("mode")) s.mode = parse_root_mode(get<std::string>(j, "mode"));
  if (j.contains("ray")) s.ray = parse_path(get<std::string>(j, "ray"));
  s.weights = parse_weights(j.contains("weights") ? j.at("weights") : json::object());
  const json& t = j.contains("tree") ? j.at("tree") : json::object();
  const auto kind = get<std::string>(t, "kind");
  if (kind == "finite") {
    s.tree = std::make_shared<const TreeSpec>(
        TreeSpec::finite(get<std::vector<std::vector<int>>>(t, "children"), t.value("names", std::vector<std::string>{})));
  } else if (kind == "homogeneous") {
    s.tree = std::make_shared<const TreeSpec>(TreeSpec::homogeneous(get<int>(t, "p")));
  } else if (kind == "by_level") {
    s.tree = std::make_shared<const TreeSpec>(
        TreeSpec::by_level(get<std::vector<std::uint64_t>>(t, "counts"), get<std::uint64_t>(t, "tail")));
  } else if (kind == "by_branch") {
    s.tree = std::make_shared<const TreeSpec>(TreeSpec::by_branch(get<std::vector<std::uint64_t>>(t, "branching")));
  } else if (kind == "spine") {
    s.tree = std::make_shared<const TreeSpec>(TreeSpec::spine());
  } else if (kind == "words") {
    WordFamily f;
    f.body = get<std::vector<int>>(t, "body");
    f.terminal = get<int>(t, "terminal");
    f.w = s.weights;
    f.label = s.label;
    for (int l : f.letters())
      if (l < 0) throw Error("schema", "cli", "letters must be nonnegative");
    s.tree = f.extension_spec();
    s.words = f;
  } else {
    throw Error("schema", "cli", "unknown tree kind", {{"kind", kind}});
  }
  if (s.tree->is_finite() && s.weights->max_level() < s.tree->depth())
    throw Error("schema", "cli", "weights shorter than the tree depth",
                {{"depth", std::to_string(s.tree->depth())}, {"levels", std::to_string(s.weights->max_level() + 1)}});
  return s;
}

LoadedSpec load_spec(const std::string& path) {
  const std::string p = resolve_input(path);
  std::ifstream in(p);
  if (!in) throw Error("io", "cli", "cannot open spec file", {{"path", path}});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("schema", "cli", "spec is not valid JSON", {{"path", path}, {"detail", e.what()}});
  }
  return parse_spec(j);
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  const std::string p = resolve_input(path);
  std::ifstream in(p);
  if (!in) throw Error("io", "cli", "cannot open matrix file", {{"path", path}});
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error("schema", "cli", "non-numeric matrix entry", {{"path", path}, {"cell", cell}});
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("schema", "cli", "empty matrix", {{"path", path}});
  Eigen::MatrixXd M(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw Error("schema", "cli", "ragged matrix rows", {{"path", path}});
    for (std::size_t k = 0; k < rows[i].size(); ++k) M(i, k) = rows[i][k];
  }
  return M;
}

std::string fixtures_dir() {
  if (const char* env = std::getenv("TREEPOT_FIXTURES"); env && *env) return env;
  return TREEPOT_DEFAULT_FIXTURES;
}

std::string resolve_input(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  fs::path alt = fs::path(fixtures_dir()) / path;
  if (fs::exists(alt)) return alt.string();
  return path;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace treepot
