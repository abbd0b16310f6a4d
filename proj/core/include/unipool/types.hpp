#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace unipool {

// Units policy: distances in meters, angles in radians, timestamps in
// integer microseconds since epoch, rates in change-per-second.

enum class Partition { Static, HF, SF };

const char* to_string(Partition p);
Partition partition_from_string(const std::string& s);

enum class Modality { ImageSemantic, LidarSummary, Structured };

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

// A pool field value: free text or a numeric scalar with an optional unit tag.
struct FieldValue {
  enum class Kind { Number, Text };

  Kind kind = Kind::Text;
  double number = 0.0;
  std::string text;
  std::string unit;  // numbers only, "" when dimensionless

  static FieldValue num(double v, std::string u = "") {
    FieldValue f;
    f.kind = Kind::Number;
    f.number = v;
    f.unit = std::move(u);
    return f;
  }
  static FieldValue str(std::string s) {
    FieldValue f;
    f.kind = Kind::Text;
    f.text = std::move(s);
    return f;
  }

  bool is_number() const { return kind == Kind::Number; }
  bool is_text() const { return kind == Kind::Text; }

  bool operator==(const FieldValue&) const = default;
};

using FieldMap = std::map<std::string, FieldValue>;

struct GeoAnchor {
  std::string intersection_id;
  double x_m = 0.0;
  double y_m = 0.0;

  // intersection_id non-empty, |x|,|y| <= 10 km (local frame bound)
  bool valid() const;
  bool operator==(const GeoAnchor&) const = default;
};

double anchor_distance_m(const GeoAnchor& a, const GeoAnchor& b);

// One timestamped, anchored observation from an infrastructure source.
struct RawRecord {
  std::string source_id;
  Modality modality = Modality::Structured;
  std::int64_t timestamp_us = 0;
  GeoAnchor anchor;
  FieldMap payload;
  std::string calibration_frame;

  bool operator==(const RawRecord&) const = default;
};

// Controlled vocabulary for pool field keys; extension keys use an "x_" prefix.
bool is_valid_field_key(const std::string& key);

// Language-based pool row.
struct KnowledgeEntry {
  std::uint64_t entry_id = 0;
  GeoAnchor anchor;
  std::int64_t timestamp_us = 0;
  FieldMap fields;
  std::string reason;
  std::string prediction;
  Partition partition = Partition::Static;
  // Lazily computed by the query engine; never persisted or transmitted.
  mutable std::optional<std::vector<double>> embedding;

  bool operator==(const KnowledgeEntry& o) const {
    return entry_id == o.entry_id && anchor == o.anchor &&
           timestamp_us == o.timestamp_us && fields == o.fields &&
           reason == o.reason && prediction == o.prediction &&
           partition == o.partition;
  }
};

struct RecordError {
  std::string source_id;
  std::int64_t timestamp_us = 0;
  std::string message;
};

// Sampled pose trace: (t_offset_s, x_m, y_m, heading_rad) at a uniform step.
struct TrajectoryPoint {
  double t_offset_s = 0.0;
  double x_m = 0.0;
  double y_m = 0.0;
  double heading_rad = 0.0;
};

struct Trajectory2D {
  std::vector<TrajectoryPoint> points;
  double dt_s = 0.1;

  // >= 2 points, uniform spacing dt_s within 1e-9
  void validate() const;
  double duration_s() const {
    return points.empty() ? 0.0 : points.back().t_offset_s;
  }
};

}  // namespace unipool
