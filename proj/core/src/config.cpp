#include "unipool/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace unipool {

void Config::validate() const {
  thresholds.validate();
  if (window_us <= 0) {
    throw std::invalid_argument("config: window_us must be positive");
  }
  if (retrieval.dim < 1 || retrieval.k_static < 1 || retrieval.k_sf < 1 ||
      retrieval.k_hf < 1) {
    throw std::invalid_argument("config: retrieval dims and k values must be >= 1");
  }
  if (retrieval.budget_bytes < 64) {
    throw std::invalid_argument("config: budget_bytes must be >= 64");
  }
  if (!(hf_retention_s > 0.0) || !(sf_retention_s > 0.0)) {
    throw std::invalid_argument("config: retention must be positive");
  }
}

NormalizationSchema default_schema() {
  // intentionally empty: schema entries apply to every structured record in
  // the stream, so defaults belong to deployment configs that know their
  // sources, not to a built-in
  return {};
}

Config default_config() {
  Config cfg;
  cfg.transforms["unified"] = RigidTransform2D{};  // identity
  cfg.schema = default_schema();
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "'");
}

void apply_key(Config& cfg, const std::string& key, const std::string& value) {
  if (key == "eps_low") cfg.thresholds.eps_low = std::stod(value);
  else if (key == "eps_high") cfg.thresholds.eps_high = std::stod(value);
  else if (key == "horizon_s") cfg.thresholds.horizon_s = std::stod(value);
  else if (key == "hf_freq_hz") cfg.thresholds.hf_freq_hz = std::stod(value);
  else if (key == "lf_freq_hz") cfg.thresholds.lf_freq_hz = std::stod(value);
  else if (key == "window_us") cfg.window_us = std::stoll(value);
  else if (key == "dim") cfg.retrieval.dim = std::stoi(value);
  else if (key == "k_static") cfg.retrieval.k_static = std::stoi(value);
  else if (key == "k_sf") cfg.retrieval.k_sf = std::stoi(value);
  else if (key == "k_hf") cfg.retrieval.k_hf = std::stoi(value);
  else if (key == "tau_hf_s") cfg.retrieval.tau_hf_s = std::stod(value);
  else if (key == "tau_sf_s") cfg.retrieval.tau_sf_s = std::stod(value);
  else if (key == "rho_m") cfg.retrieval.rho_m = std::stod(value);
  else if (key == "lookback_hf_s") cfg.retrieval.lookback_hf_s = std::stod(value);
  else if (key == "lookback_sf_s") cfg.retrieval.lookback_sf_s = std::stod(value);
  else if (key == "budget_bytes") cfg.retrieval.budget_bytes = std::stoul(value);
  else if (key == "max_candidates") cfg.retrieval.max_candidates = std::stoul(value);
  else if (key == "hf_retention_s") cfg.hf_retention_s = std::stod(value);
  else if (key == "sf_retention_s") cfg.sf_retention_s = std::stod(value);
  else if (key == "fsync") cfg.fsync_writes = parse_bool(value);
  else if (key == "bind_address") cfg.bind_address = value;
  else if (key == "port") cfg.port = std::stoi(value);
  else if (key.rfind("transform.", 0) == 0) {
    const auto parts = split(value, ',');
    if (parts.size() != 3) {
      throw std::invalid_argument("config: transform needs theta,tx,ty: " + key);
    }
    cfg.transforms[key.substr(10)] = {std::stod(parts[0]), std::stod(parts[1]),
                                      std::stod(parts[2])};
  } else if (key.rfind("schema.", 0) == 0) {
    const auto parts = split(value, ',');
    if (parts.size() < 3) {
      throw std::invalid_argument("config: schema needs min,max,scale|raw[,default]: " + key);
    }
    FieldSpec spec;
    spec.min = std::stod(parts[0]);
    spec.max = std::stod(parts[1]);
    spec.scalable = parts[2] == "scale";
    if (parts.size() >= 4) {
      try {
        spec.default_value = FieldValue::num(std::stod(parts[3]));
      } catch (...) {
        spec.default_value = FieldValue::str(parts[3]);
      }
    } else {
      spec.default_value = FieldValue::num(spec.min);
    }
    cfg.schema[key.substr(7)] = spec;
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

}  // namespace

Config parse_config(const std::string& text) {
  Config cfg = default_config();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value");
    }
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_env_overrides(Config& cfg) {
  static const char* keys[] = {
      "eps_low",       "eps_high",      "horizon_s",     "hf_freq_hz",
      "lf_freq_hz",    "window_us",     "dim",           "k_static",
      "k_sf",          "k_hf",          "tau_hf_s",      "tau_sf_s",
      "rho_m",         "lookback_hf_s", "lookback_sf_s", "budget_bytes",
      "max_candidates", "hf_retention_s", "sf_retention_s", "fsync",
      "bind_address",  "port",
  };
  for (const char* key : keys) {
    std::string env = "UNIPOOL_";
    for (const char* p = key; *p; ++p) {
      env.push_back(static_cast<char>(std::toupper(*p)));
    }
    if (const char* value = std::getenv(env.c_str())) {
      apply_key(cfg, key, value);
    }
  }
  cfg.validate();
}

}  // namespace unipool
