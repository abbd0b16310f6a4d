#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "unipool/query_engine.hpp"
#include "unipool/types.hpp"

namespace unipool {

struct VehicleState {
  GeoAnchor ego_anchor;
  double heading_rad = 0.0;
  std::vector<std::pair<std::int64_t, double>> speed_history;      // (t_us, m/s)
  std::vector<std::pair<std::int64_t, double>> curvature_history;  // (t_us, 1/m)

  void validate() const;
  double last_speed() const;
  double last_curvature() const;
};

// 10 Hz command frames over the horizon, offsets 0.1, 0.2, ...
struct PlanFrame {
  double t_offset_s = 0.0;
  double speed_mps = 0.0;
  double curvature_inv_m = 0.0;

  bool operator==(const PlanFrame&) const = default;
};

struct PlanOutput {
  std::vector<PlanFrame> frames;

  void validate() const;
};

// Fixed-order textual fusion of vehicle state and retrieved context, plus a
// parsed summary the rule planner keys off.
struct ContextSummary {
  std::optional<std::string> signal_state;
  std::vector<std::string> objects;
  std::vector<std::string> alerts;
  double ego_distance_to_intersection_m = 0.0;
};

struct ReasoningContext {
  std::string document;
  ContextSummary summary;
  VehicleState vehicle;
  double horizon_s = 4.5;
};

// Assembles the reasoning document from the vehicle state and a canonical
// payload string. Throws std::runtime_error naming the offending section on
// malformed payload JSON.
ReasoningContext fuse_vehicle_context(const VehicleState& v,
                                      const std::string& payload_json,
                                      double horizon_s = 4.5);
ReasoningContext fuse_vehicle_context(const VehicleState& v,
                                      const FusedContext& e,
                                      double horizon_s = 4.5);

class Planner {
 public:
  virtual ~Planner() = default;
  virtual PlanOutput plan(const ReasoningContext& ctx) = 0;
  virtual std::string name() const = 0;
};

// Validates the planner output against the PlanOutput invariants; an invalid
// plan is an error, never silently clamped.
PlanOutput plan(const ReasoningContext& ctx, Planner& planner);

// Deterministic baseline: hold the last observed speed and curvature;
// brake at 3 m/s^2 for a red signal within signal_radius_m of the
// intersection; brake at 5 m/s^2 when an alert mentions a collision.
class RuleBasedPlanner : public Planner {
 public:
  struct Params {
    double signal_radius_m = 50.0;
    double signal_decel_mps2 = 3.0;
    double alert_decel_mps2 = 5.0;
  };

  RuleBasedPlanner() : RuleBasedPlanner(Params{}) {}
  explicit RuleBasedPlanner(Params params) : params_(params) {}

  PlanOutput plan(const ReasoningContext& ctx) override;
  std::string name() const override { return "rule_based"; }

 private:
  Params params_;
};

// Out-of-process adapter: writes the reasoning document terminated by a
// blank line to a child process and reads back one JSON object
// {"frames": [[t, speed, curvature], ...]}. Lets a real language model be
// attached without adding model dependencies here.
class ExternalProcessPlanner : public Planner {
 public:
  explicit ExternalProcessPlanner(std::vector<std::string> argv);

  PlanOutput plan(const ReasoningContext& ctx) override;
  std::string name() const override { return "external_process"; }

 private:
  std::vector<std::string> argv_;
};

}  // namespace unipool
