#include "unipool/types.hpp"

#include <array>
#include <cmath>
#include <cstring>

namespace unipool {

const char* to_string(Partition p) {
  switch (p) {
    case Partition::Static: return "static";
    case Partition::HF: return "hf";
    case Partition::SF: return "sf";
  }
  return "static";
}

Partition partition_from_string(const std::string& s) {
  if (s == "static" || s == "Static") return Partition::Static;
  if (s == "hf" || s == "HF") return Partition::HF;
  if (s == "sf" || s == "SF") return Partition::SF;
  throw std::invalid_argument("unknown partition: " + s);
}

const char* to_string(Modality m) {
  switch (m) {
    case Modality::ImageSemantic: return "image_semantic";
    case Modality::LidarSummary: return "lidar_summary";
    case Modality::Structured: return "structured";
  }
  return "structured";
}

Modality modality_from_string(const std::string& s) {
  if (s == "image_semantic") return Modality::ImageSemantic;
  if (s == "lidar_summary") return Modality::LidarSummary;
  if (s == "structured") return Modality::Structured;
  throw std::invalid_argument("unknown modality: " + s);
}

bool GeoAnchor::valid() const {
  return !intersection_id.empty() && std::abs(x_m) <= 10000.0 &&
         std::abs(y_m) <= 10000.0 && std::isfinite(x_m) && std::isfinite(y_m);
}

double anchor_distance_m(const GeoAnchor& a, const GeoAnchor& b) {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

namespace {
constexpr std::array<const char*, 15> kFieldVocabulary = {
    "lane_markings",  "traffic_signs",  "weather",     "traffic_conditions",
    "objects",        "signal_state",   "trajectory",  "velocity",
    "object_type",    "density",        "alert",       "construction",
    "abnormal_event", "road_geometry",  "map_feature",
};
}  // namespace

bool is_valid_field_key(const std::string& key) {
  if (key.rfind("x_", 0) == 0 && key.size() > 2) return true;
  for (const char* k : kFieldVocabulary) {
    if (key == k) return true;
  }
  return false;
}

void Trajectory2D::validate() const {
  if (points.size() < 2) {
    throw std::invalid_argument("trajectory needs >= 2 points");
  }
  if (!(dt_s > 0.0)) {
    throw std::invalid_argument("trajectory dt_s must be positive");
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    double gap = points[i].t_offset_s - points[i - 1].t_offset_s;
    if (std::abs(gap - dt_s) > 1e-9) {
      throw std::invalid_argument("trajectory spacing is not uniform");
    }
  }
}

}  // namespace unipool
