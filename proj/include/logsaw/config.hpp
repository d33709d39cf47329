#ifndef LOGSAW_CONFIG_HPP
#define LOGSAW_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

namespace logsaw {

// Flat "key = value" config text. '#' starts a comment; blank lines are
// skipped. Later keys override earlier ones.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap load_config(const std::string& path);

// Applies "key=value" override strings (the CLI's --set flag).
void apply_overrides(ConfigMap& config, const std::vector<std::string>& overrides);

double config_double(const ConfigMap& config, const std::string& key, double fallback);
int config_int(const ConfigMap& config, const std::string& key, int fallback);
std::string config_string(const ConfigMap& config, const std::string& key,
                          const std::string& fallback);

} // namespace logsaw

#endif
