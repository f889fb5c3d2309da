#pragma once

#include <map>
#include <string>
#include <vector>

namespace mono {

// Exit codes: 0 success, 1 usage error, 2 verification failure,
// 3 numerical failure.
int run_cli(const std::vector<std::string>& args);

// Flat key=value configuration with [section] headers; keys are stored as
// "section.key". Unknown keys are rejected with the list of valid ones.
std::map<std::string, std::string> parse_config_file(const std::string& path);

}  // namespace mono
