#pragma once

#include <fstream>
#include <sstream>
#include <string>

namespace mucorest::testing {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string fixture(const std::string& name) { return read_file(std::string(MUCOREST_FIXTURES_DIR) + "/" + name); }

inline std::string scenario_file(const std::string& name) {
    return read_file(std::string(MUCOREST_SCENARIOS_DIR) + "/" + name);
}

}  // namespace mucorest::testing
