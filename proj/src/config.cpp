#include "logsaw/config.hpp"
#include "logsaw/error.hpp"

#include <fstream>

namespace logsaw {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

ConfigMap load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open config " + path);
    ConfigMap config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            fail("IOError", path + ": line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            fail("IOError", path + ": line " + std::to_string(lineno) + ": empty key");
        config[key] = value;
    }
    return config;
}

void apply_overrides(ConfigMap& config, const std::vector<std::string>& overrides) {
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            fail("InvalidInput", "--set expects key=value, got '" + kv + "'");
        config[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
    }
}

double config_double(const ConfigMap& config, const std::string& key, double fallback) {
    const auto it = config.find(key);
    if (it == config.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        fail("InvalidInput", "config key '" + key + "' is not a number: " + it->second);
    }
}

int config_int(const ConfigMap& config, const std::string& key, int fallback) {
    const auto it = config.find(key);
    if (it == config.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        fail("InvalidInput", "config key '" + key + "' is not an integer: " + it->second);
    }
}

std::string config_string(const ConfigMap& config, const std::string& key,
                          const std::string& fallback) {
    const auto it = config.find(key);
    return it == config.end() ? fallback : it->second;
}

} // namespace logsaw
