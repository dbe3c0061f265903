#include <cstdlib>
#include <fstream>

#include "common.hpp"
#include "treepot/error.hpp"
#include "treepot/spec_io.hpp"

using namespace treepot;

TEST_CASE("fixture specs load") {
  for (const char* f : {"f1.json", "homog2.json", "homog3.json", "asym.json", "inaccessible.json",
                        "single_ray.json", "figure2.json", "ex1.json", "ex2.json"})
    CHECK_NOTHROW(testing::fixture(f));
  auto f4 = load_matrix_csv(resolve_input("f4.csv"));
  CHECK(f4.rows() == 3);
  CHECK(f4(2, 2) == 3.0);
}

TEST_CASE("schema violations") {
  using nlohmann::json;
  auto code = [](const json& j) {
    try {
      parse_spec(j);
    } catch (const Error& e) {
      return e.code();
    }
    return std::string("none");
  };
  CHECK(code(json{{"weights", {{"kind", "finite"}, {"w", {1}}}}}) == "schema");
  CHECK(code(json{{"tree", {{"kind", "nope"}}}, {"weights", {{"kind", "finite"}, {"w", {1}}}}}) == "schema");
  CHECK(code(json{{"tree", {{"kind", "homogeneous"}, {"p", 2}}}, {"weights", {{"kind", "finite"}, {"w", {2, 1}}}}}) !=
        "none");
}

TEST_CASE("number formatting round-trips") {
  for (double v : {1.0 / 3.0, 0.1, 1e-300, 123456789.123456789}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  CHECK(format_double(0.5) == "0.5");
}
