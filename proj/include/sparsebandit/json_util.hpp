#pragma once

#include <algorithm>
#include <initializer_list>
#include <json.hpp>
#include <stdexcept>
#include <string>

namespace sparsebandit {

// Config objects are parsed strictly: a key outside `allowed` is a hard error
// so typos in sweep overrides fail loudly instead of silently using defaults.
inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> allowed, const char* what) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end())
      throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
  }
}

}  // namespace sparsebandit
