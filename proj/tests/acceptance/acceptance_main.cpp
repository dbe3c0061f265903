#include <cstdio>
#include <cstdlib>
#include <string>

#include "treepot/acceptance.hpp"

int main(int argc, char** argv) {
  treepot::AcceptanceOptions opt;
  int only = 0;
  for (int a = 1; a < argc; ++a) {
    std::string s = argv[a];
    if (s == "--seed" && a + 1 < argc) opt.seed = std::strtoull(argv[++a], nullptr, 10);
    else if (s == "--paths" && a + 1 < argc) opt.paths = std::strtoull(argv[++a], nullptr, 10);
    else if (s == "--criterion" && a + 1 < argc) only = std::atoi(argv[++a]);
  }
  int failed = 0;
  for (int id = 1; id <= treepot::kNumCriteria; ++id) {
    if (only && id != only) continue;
    auto r = treepot::run_criterion(id, opt);
    std::printf("criterion %2d %s: %s (%.2fs) %s\n", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
