#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unipool/dynamics.hpp"
#include "unipool/query_engine.hpp"
#include "unipool/reasoner.hpp"
#include "unipool/scenario.hpp"
#include "unipool/types.hpp"

namespace unipool {

struct ComfortCoeffs {
  double alpha = 1.0;  // weight on mean |acceleration|
  double beta = 2.0;   // weight on mean |jerk|
  double gamma = 0.5;  // weight on mean |yaw-rate derivative|
};

// Unicycle integration of a plan from the ego pose. Heading updates first:
// heading += curvature * speed * dt, then the position steps along the new
// heading. The returned trajectory starts at the ego pose with t_offset 0.
Trajectory2D integrate_plan(const VehicleState& v, const PlanOutput& p);

// Mean Euclidean displacement over frames with 0 < t_offset <= horizon_s
// (ADE to the horizon). Both trajectories must cover the horizon.
double l2_error(const Trajectory2D& pred, const Trajectory2D& gt,
                double horizon_s);

struct CollisionScenario {
  Trajectory2D pred;
  std::vector<Trajectory2D> agents;
};

// Percent of scenarios where any frame with t_offset <= horizon_s brings the
// ego within radius_m of an agent center (disc model).
double collision_rate(const std::vector<CollisionScenario>& scenarios,
                      double horizon_s, double radius_m);

// 1 - tanh(alpha*mean|accel| + beta*mean|jerk| + gamma*mean|yaw_rate_dot|)
// over frames up to horizon_s. Speeds come from position differences;
// derivatives use central differences in the interior and one-sided
// differences at the boundaries; heading differences wrap to (-pi, pi].
// Requires >= 4 points inside the horizon.
double comfort_score(const Trajectory2D& traj, double horizon_s,
                     const ComfortCoeffs& coeffs = {});

// Exact UTF-8 byte length of the canonical payload. No compression, no
// estimate.
std::size_t transmission_cost(const FusedContext& ctx);

struct ScenarioResult {
  std::string scenario_id;
  std::map<double, double> l2_m;       // horizon_s -> meters
  std::map<double, double> comfort;    // horizon_s -> score
  bool collided = false;
  bool stopline_violation = false;
  std::size_t transmission_bytes = 0;
  std::string error;  // non-empty when the scenario failed
};

struct MetricsReport {
  std::string arm;                    // "retrieval_on" | "retrieval_off"
  std::map<double, double> l2_m;      // horizon_s -> mean meters
  double l2_avg_m = 0.0;              // mean of the horizon values
  double collision_rate_pct = 0.0;
  std::map<double, double> comfort;   // horizon_s -> mean score
  std::size_t transmission_bytes = 0; // mean payload bytes per query
  int stopline_violations = 0;
  int n_scenarios = 0;                // successes only
  std::vector<ScenarioResult> scenarios;
};

struct EvalOptions {
  std::vector<double> horizons_s = {2.5, 3.5, 4.5};
  double collision_radius_m = 2.0;
  double decision_time_s = 2.0;  // offset from scenario t_base
  ComfortCoeffs comfort;
  Thresholds thresholds;
  RetrievalConfig retrieval;
  std::int64_t window_us = 100'000;
};

// Full pipeline per scenario: ingest emitted records into a fresh pool,
// retrieve (or not), fuse, plan, integrate, score. Per-scenario failures are
// recorded and skipped; n_scenarios counts successes.
MetricsReport run_report(const std::vector<Scenario>& corpus, Planner& planner,
                         bool retrieval_on, const EvalOptions& opts = {});

std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);

// Aligned text table, one row per arm, columns per horizon plus Avg.
std::string render_table(const std::vector<MetricsReport>& reports);

}  // namespace unipool
