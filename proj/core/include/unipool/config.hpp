#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "unipool/dynamics.hpp"
#include "unipool/ingest.hpp"
#include "unipool/query_engine.hpp"

namespace unipool {

struct Config {
  Thresholds thresholds;
  RetrievalConfig retrieval;
  std::int64_t window_us = 100'000;
  double hf_retention_s = 60.0;
  double sf_retention_s = 3600.0;
  bool fsync_writes = false;
  std::string bind_address = "127.0.0.1";
  int port = 8700;
  TransformMap transforms;        // calibration_frame -> transform
  NormalizationSchema schema;     // structured normalization

  void validate() const;
};

// Built-in normalization schema for the structured record keys the
// simulator and service use by default.
NormalizationSchema default_schema();

Config default_config();

// Key-value document: one `key = value` per line, '#' comments.
// transform.<frame> = theta_rad,tx_m,ty_m
// schema.<key> = min,max,scale|raw[,default]
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text);

// UNIPOOL_<KEY> environment variables override scalar keys.
void apply_env_overrides(Config& cfg);

}  // namespace unipool
