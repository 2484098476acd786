#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace signlab {

using Json = nlohmann::json;

// Bad user input: unknown keys, wrong types, unreadable config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json load_config_file(const std::filesystem::path& path);

// Overlays `user` on `defaults`. Every user key must exist in the defaults
// ("unknown key: X") and match its kind; numbers are coerced to the default's
// integer or floating type so equal configs serialize identically.
Json resolve_config(const Json& defaults, const Json& user);

// FNV-1a 64 of the compact sorted-key dump, as 16 hex digits.
std::string config_digest(const Json& resolved);

// Typed reads that report the offending key.
double get_double(const Json& cfg, const std::string& key);
std::uint64_t get_uint(const Json& cfg, const std::string& key);
bool get_bool(const Json& cfg, const std::string& key);
std::string get_string(const Json& cfg, const std::string& key);
std::vector<double> get_double_list(const Json& cfg, const std::string& key);
std::vector<std::string> get_string_list(const Json& cfg, const std::string& key);
std::vector<std::size_t> get_size_list(const Json& cfg, const std::string& key);

}  // namespace signlab
