#include "unipool/json_codec.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace unipool {

using nlohmann::json;

namespace {

json field_value_to_json(const FieldValue& v) {
  if (v.is_text()) return v.text;
  if (v.unit.empty()) return v.number;
  return json{{"value", v.number}, {"unit", v.unit}};
}

FieldValue field_value_from_json(const json& j) {
  if (j.is_string()) return FieldValue::str(j.get<std::string>());
  if (j.is_number()) return FieldValue::num(j.get<double>());
  if (j.is_object() && j.contains("value")) {
    return FieldValue::num(j.at("value").get<double>(),
                           j.value("unit", std::string{}));
  }
  throw std::invalid_argument("field value must be text, number, or {value,unit}");
}

json field_map_to_json(const FieldMap& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = field_value_to_json(v);
  return out;
}

FieldMap field_map_from_json(const json& j) {
  FieldMap out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out.emplace(it.key(), field_value_from_json(it.value()));
  }
  return out;
}

json anchor_to_json(const GeoAnchor& a) {
  return json{{"intersection_id", a.intersection_id}, {"x_m", a.x_m}, {"y_m", a.y_m}};
}

GeoAnchor anchor_from_json(const json& j) {
  GeoAnchor a;
  a.intersection_id = j.at("intersection_id").get<std::string>();
  a.x_m = j.at("x_m").get<double>();
  a.y_m = j.at("y_m").get<double>();
  return a;
}

}  // namespace

std::string raw_record_to_json(const RawRecord& r) {
  json j;
  j["source_id"] = r.source_id;
  j["modality"] = to_string(r.modality);
  j["timestamp_us"] = r.timestamp_us;
  j["anchor"] = anchor_to_json(r.anchor);
  j["payload"] = field_map_to_json(r.payload);
  j["calibration_frame"] = r.calibration_frame;
  return j.dump();
}

RawRecord raw_record_from_json(const std::string& text) {
  const json j = json::parse(text);
  RawRecord r;
  r.source_id = j.at("source_id").get<std::string>();
  r.modality = modality_from_string(j.at("modality").get<std::string>());
  r.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  r.anchor = anchor_from_json(j.at("anchor"));
  r.payload = field_map_from_json(j.at("payload"));
  r.calibration_frame = j.value("calibration_frame", std::string{"unified"});
  return r;
}

std::string knowledge_entry_to_json(const KnowledgeEntry& e) {
  json j;
  j["entry_id"] = e.entry_id;
  j["anchor"] = anchor_to_json(e.anchor);
  j["timestamp_us"] = e.timestamp_us;
  j["fields"] = field_map_to_json(e.fields);
  j["reason"] = e.reason;
  j["prediction"] = e.prediction;
  j["partition"] = to_string(e.partition);
  return j.dump();
}

KnowledgeEntry knowledge_entry_from_json(const std::string& text) {
  const json j = json::parse(text);
  KnowledgeEntry e;
  e.entry_id = j.at("entry_id").get<std::uint64_t>();
  e.anchor = anchor_from_json(j.at("anchor"));
  e.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  e.fields = field_map_from_json(j.at("fields"));
  e.reason = j.at("reason").get<std::string>();
  e.prediction = j.at("prediction").get<std::string>();
  e.partition = partition_from_string(j.at("partition").get<std::string>());
  return e;
}

std::string requirement_to_json(const QueryRequirement& r) {
  json j;
  j["ego_anchor"] = anchor_to_json(r.ego_anchor);
  j["intent"] = r.intent;
  j["perception_summary"] = r.perception_summary;
  j["t_now_us"] = r.t_now_us;
  j["horizon_s"] = r.horizon_s;
  return j.dump();
}

QueryRequirement requirement_from_json(const std::string& text) {
  const json j = json::parse(text);
  QueryRequirement r;
  r.ego_anchor = anchor_from_json(j.at("ego_anchor"));
  r.intent = j.at("intent").get<std::string>();
  r.perception_summary = j.at("perception_summary").get<std::string>();
  r.t_now_us = j.at("t_now_us").get<std::int64_t>();
  r.horizon_s = j.value("horizon_s", 4.5);
  return r;
}

std::string plan_output_to_json(const PlanOutput& p) {
  json frames = json::array();
  for (const auto& f : p.frames) {
    frames.push_back(json::array({f.t_offset_s, f.speed_mps, f.curvature_inv_m}));
  }
  return json{{"frames", frames}}.dump();
}

PlanOutput plan_output_from_json(const std::string& text) {
  const json j = json::parse(text);
  PlanOutput p;
  for (const auto& f : j.at("frames")) {
    if (!f.is_array() || f.size() != 3) {
      throw std::invalid_argument("plan frame must be [t, speed, curvature]");
    }
    p.frames.push_back({f[0].get<double>(), f[1].get<double>(), f[2].get<double>()});
  }
  return p;
}

std::vector<RawRecord> read_record_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open record file: " + path);
  std::vector<RawRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(raw_record_from_json(line));
  }
  return out;
}

void write_record_file(const std::string& path,
                       const std::vector<RawRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write record file: " + path);
  for (const auto& r : records) out << raw_record_to_json(r) << "\n";
}

}  // namespace unipool
