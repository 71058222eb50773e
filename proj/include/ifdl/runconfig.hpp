#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace ifdl::cfg {

// A run is described by one JSON document. Defaults live in default_config();
// a user file may override any subset, and command-line "key.path=value"
// overrides beat the file. Unknown keys anywhere are an error.
nlohmann::json default_config();

// Validate `user` against the default tree: every key must exist in the
// defaults at the same path, and leaf types must match. Throws
// std::runtime_error naming the offending path.
void validate_keys(const nlohmann::json& user, const nlohmann::json& defaults,
                   const std::string& path = "");

// defaults <- file (optional) <- overrides ("a.b.c=literal").
nlohmann::json load_run_config(const std::string& config_path,
                               const std::vector<std::string>& overrides);

// One line per leaf, "a.b.c = value", sorted — printed at startup.
std::string render_effective(const nlohmann::json& cfg);

}  // namespace ifdl::cfg
