#include "signlab/config.hpp"

#include <cstdio>
#include <fstream>

namespace signlab {

namespace {

bool same_kind(const Json& def, const Json& val) {
  if (def.is_number()) return val.is_number();
  return def.type() == val.type();
}

Json coerce(const std::string& key, const Json& def, const Json& val) {
  if (!same_kind(def, val)) {
    throw ConfigError("invalid value for key: " + key + " (expected " +
                      std::string(def.type_name()) + ", got " + val.type_name() + ")");
  }
  if (def.is_number_unsigned() || def.is_number_integer()) {
    if (val.is_number_float()) {
      const double d = val.get<double>();
      if (d != static_cast<double>(static_cast<long long>(d))) {
        throw ConfigError("invalid value for key: " + key + " (expected an integer)");
      }
      if (def.is_number_unsigned() && d < 0) {
        throw ConfigError("invalid value for key: " + key + " (must be nonnegative)");
      }
      return def.is_number_unsigned() ? Json(static_cast<std::uint64_t>(d))
                                      : Json(static_cast<std::int64_t>(d));
    }
    if (def.is_number_unsigned() && val.is_number_integer() && !val.is_number_unsigned() &&
        val.get<std::int64_t>() < 0) {
      throw ConfigError("invalid value for key: " + key + " (must be nonnegative)");
    }
    return val;
  }
  if (def.is_number_float()) return Json(val.get<double>());
  if (def.is_array() && !def.empty() && def.front().is_number_float()) {
    Json out = Json::array();
    for (const Json& v : val) {
      if (!v.is_number()) throw ConfigError("invalid value for key: " + key + " (expected numbers)");
      out.push_back(v.get<double>());
    }
    return out;
  }
  return val;
}

}  // namespace

Json load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path.string());
  try {
    Json j = Json::parse(is);
    if (!j.is_object()) throw ConfigError("config must be a JSON object: " + path.string());
    return j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
}

Json resolve_config(const Json& defaults, const Json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  Json out = defaults;
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!defaults.contains(it.key())) throw ConfigError("unknown key: " + it.key());
    out[it.key()] = coerce(it.key(), defaults.at(it.key()), it.value());
  }
  return out;
}

std::string config_digest(const Json& resolved) {
  const std::string text = resolved.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

const Json& at(const Json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError("missing key: " + key);
  return cfg.at(key);
}

}  // namespace

double get_double(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  if (!v.is_number()) throw ConfigError("invalid value for key: " + key);
  return v.get<double>();
}

std::uint64_t get_uint(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ConfigError("invalid value for key: " + key);
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  if (!v.is_boolean()) throw ConfigError("invalid value for key: " + key);
  return v.get<bool>();
}

std::string get_string(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  if (!v.is_string()) throw ConfigError("invalid value for key: " + key);
  return v.get<std::string>();
}

std::vector<double> get_double_list(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  std::vector<double> out;
  if (!v.is_array()) throw ConfigError("invalid value for key: " + key);
  for (const Json& x : v) {
    if (!x.is_number()) throw ConfigError("invalid value for key: " + key);
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::string> get_string_list(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  std::vector<std::string> out;
  if (!v.is_array()) throw ConfigError("invalid value for key: " + key);
  for (const Json& x : v) {
    if (!x.is_string()) throw ConfigError("invalid value for key: " + key);
    out.push_back(x.get<std::string>());
  }
  return out;
}

std::vector<std::size_t> get_size_list(const Json& cfg, const std::string& key) {
  const Json& v = at(cfg, key);
  std::vector<std::size_t> out;
  if (!v.is_array()) throw ConfigError("invalid value for key: " + key);
  for (const Json& x : v) {
    if (!x.is_number_integer() || x.get<std::int64_t>() < 0) {
      throw ConfigError("invalid value for key: " + key);
    }
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

}  // namespace signlab
