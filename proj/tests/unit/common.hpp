#pragma once

#include <memory>
#include <string>

#include "doctest.h"
#include "treepot/spec_io.hpp"

namespace testing {

inline treepot::LoadedSpec fixture(const std::string& name) {
  return treepot::load_spec(treepot::resolve_input(name));
}

}  // namespace testing
