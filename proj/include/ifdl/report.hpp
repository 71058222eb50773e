#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace ifdl::report {

// Fixed-width ascii table; numeric cells are pre-formatted by the caller.
std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::vector<std::string>>& rows);

std::string fmt(double v, int decimals = 2);

// Renders everything recognizable under run_dir (loss history, eval results,
// judge scores, user-study votes) into run_dir/report/: report.txt,
// report.json, and PNG plots. Throws std::runtime_error("nothing to report")
// when no known artifact is present.
void render_run(const std::string& run_dir);

}  // namespace ifdl::report
