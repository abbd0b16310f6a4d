#include "unipool/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "unipool/pipeline.hpp"

namespace unipool {

using nlohmann::json;

Trajectory2D integrate_plan(const VehicleState& v, const PlanOutput& p) {
  v.validate();
  p.validate();
  Trajectory2D out;
  out.dt_s = 0.1;
  double x = v.ego_anchor.x_m;
  double y = v.ego_anchor.y_m;
  double heading = v.heading_rad;
  out.points.push_back({0.0, x, y, heading});
  for (const auto& f : p.frames) {
    heading += f.curvature_inv_m * f.speed_mps * out.dt_s;
    x += f.speed_mps * std::cos(heading) * out.dt_s;
    y += f.speed_mps * std::sin(heading) * out.dt_s;
    out.points.push_back({f.t_offset_s, x, y, heading});
  }
  return out;
}

namespace {

std::size_t frames_to_horizon(const Trajectory2D& t, double horizon_s) {
  // index of the last point with t_offset <= horizon
  std::size_t last = 0;
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    if (t.points[i].t_offset_s <= horizon_s + 1e-9) last = i;
  }
  return last;
}

double wrap_angle(double a) {
  double d = std::fmod(a + M_PI, 2.0 * M_PI);
  if (d <= 0.0) d += 2.0 * M_PI;
  return d - M_PI;
}

}  // namespace

double l2_error(const Trajectory2D& pred, const Trajectory2D& gt,
                double horizon_s) {
  pred.validate();
  gt.validate();
  if (std::abs(pred.dt_s - gt.dt_s) > 1e-9) {
    throw std::invalid_argument("l2_error: trajectories use different steps");
  }
  if (pred.duration_s() + 1e-9 < horizon_s || gt.duration_s() + 1e-9 < horizon_s) {
    throw std::invalid_argument("l2_error: horizon beyond trajectory coverage");
  }
  const std::size_t n = static_cast<std::size_t>(
      std::llround(horizon_s / pred.dt_s));
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    sum += std::hypot(pred.points[i].x_m - gt.points[i].x_m,
                      pred.points[i].y_m - gt.points[i].y_m);
  }
  return sum / static_cast<double>(n);
}

double collision_rate(const std::vector<CollisionScenario>& scenarios,
                      double horizon_s, double radius_m) {
  if (scenarios.empty()) {
    throw std::invalid_argument("collision_rate: empty scenario list");
  }
  if (!(radius_m > 0.0)) {
    throw std::invalid_argument("collision_rate: radius_m must be positive");
  }
  int colliding = 0;
  for (const auto& sc : scenarios) {
    bool hit = false;
    const std::size_t last = frames_to_horizon(sc.pred, horizon_s);
    for (const auto& agent : sc.agents) {
      const std::size_t n = std::min(last + 1, agent.points.size());
      for (std::size_t i = 0; i < n && !hit; ++i) {
        const double d = std::hypot(sc.pred.points[i].x_m - agent.points[i].x_m,
                                    sc.pred.points[i].y_m - agent.points[i].y_m);
        if (d < radius_m) hit = true;
      }
      if (hit) break;
    }
    if (hit) ++colliding;
  }
  return 100.0 * static_cast<double>(colliding) /
         static_cast<double>(scenarios.size());
}

double comfort_score(const Trajectory2D& traj, double horizon_s,
                     const ComfortCoeffs& coeffs) {
  traj.validate();
  const std::size_t m = frames_to_horizon(traj, horizon_s) + 1;
  if (m < 4) {
    throw std::invalid_argument("comfort_score: needs >= 4 points in horizon");
  }
  const double dt = traj.dt_s;

  std::vector<double> v(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    v[i] = std::hypot(traj.points[i + 1].x_m - traj.points[i].x_m,
                      traj.points[i + 1].y_m - traj.points[i].y_m) /
           dt;
  }
  // acceleration: central differences inside, one-sided at the ends
  const std::size_t nv = v.size();
  std::vector<double> accel(nv);
  accel[0] = (v[1] - v[0]) / dt;
  accel[nv - 1] = (v[nv - 1] - v[nv - 2]) / dt;
  for (std::size_t i = 1; i + 1 < nv; ++i) {
    accel[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
  }
  std::vector<double> jerk(nv - 1);
  for (std::size_t i = 0; i + 1 < nv; ++i) {
    jerk[i] = (accel[i + 1] - accel[i]) / dt;
  }
  std::vector<double> yaw_rate(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    yaw_rate[i] =
        wrap_angle(traj.points[i + 1].heading_rad - traj.points[i].heading_rad) /
        dt;
  }
  std::vector<double> yaw_accel(m - 2);
  for (std::size_t i = 0; i + 2 < m; ++i) {
    yaw_accel[i] = (yaw_rate[i + 1] - yaw_rate[i]) / dt;
  }

  auto mean_abs = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += std::abs(x);
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
  };
  const double penalty = coeffs.alpha * mean_abs(accel) +
                         coeffs.beta * mean_abs(jerk) +
                         coeffs.gamma * mean_abs(yaw_accel);
  // 1 - tanh(p) in a form that stays positive when tanh saturates
  return 2.0 / (std::exp(2.0 * penalty) + 1.0);
}

std::size_t transmission_cost(const FusedContext& ctx) {
  return canonical_payload(ctx).size();
}

namespace {

VehicleState vehicle_state_at(const Scenario& s, std::size_t tick) {
  const Trajectory2D& ego = s.ego_truth;
  VehicleState v;
  const TrajectoryPoint& p = ego.points.at(tick);
  v.ego_anchor = {s.config.intersection_id, p.x_m, p.y_m};
  v.heading_rad = p.heading_rad;
  const std::size_t first = tick > 10 ? tick - 10 : 1;
  for (std::size_t j = first; j <= tick; ++j) {
    const double speed = std::hypot(ego.points[j].x_m - ego.points[j - 1].x_m,
                                    ego.points[j].y_m - ego.points[j - 1].y_m) /
                         ego.dt_s;
    const std::int64_t t_us =
        s.config.t_base_us + static_cast<std::int64_t>(j) * 100'000;
    v.speed_history.emplace_back(t_us, speed);
    v.curvature_history.emplace_back(
        t_us, 0.0);  // straight-lattice scenarios carry no curvature
  }
  return v;
}

Trajectory2D slice_rebased(const Trajectory2D& t, std::size_t start,
                           std::size_t count) {
  Trajectory2D out;
  out.dt_s = t.dt_s;
  for (std::size_t i = 0; i <= count && start + i < t.points.size(); ++i) {
    TrajectoryPoint p = t.points[start + i];
    p.t_offset_s = static_cast<double>(i) * t.dt_s;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace

MetricsReport run_report(const std::vector<Scenario>& corpus, Planner& planner,
                         bool retrieval_on, const EvalOptions& opts) {
  if (corpus.empty()) {
    throw std::invalid_argument("run_report: corpus is empty");
  }
  MetricsReport report;
  report.arm = retrieval_on ? "retrieval_on" : "retrieval_off";

  const double max_horizon =
      *std::max_element(opts.horizons_s.begin(), opts.horizons_s.end());
  std::vector<CollisionScenario> collision_scenarios;
  std::map<double, std::vector<double>> l2_samples;
  std::map<double, std::vector<double>> comfort_samples;
  std::vector<std::size_t> tx_samples;

  for (const Scenario& s : corpus) {
    ScenarioResult result;
    result.scenario_id =
        s.config.intersection_id + "/" + std::to_string(s.config.seed);
    try {
      Config cfg = default_config();
      cfg.thresholds = opts.thresholds;
      cfg.retrieval = opts.retrieval;
      cfg.window_us = opts.window_us;

      PoolStore::Options store_opts;
      store_opts.in_memory = true;
      PoolStore store(store_opts);
      ClassifierState classifier(opts.thresholds);
      IngestPipeline pipeline(store, classifier, cfg);
      pipeline.ingest(emit_records(s));

      const std::size_t tick =
          static_cast<std::size_t>(std::llround(opts.decision_time_s * 10.0));
      const std::int64_t t_now =
          s.config.t_base_us + static_cast<std::int64_t>(tick) * 100'000;
      VehicleState vstate = vehicle_state_at(s, tick);

      FusedContext ctx;
      ctx.t_us = t_now;
      if (retrieval_on) {
        QueryEngine engine(store, opts.retrieval);
        QueryRequirement r;
        r.ego_anchor = vstate.ego_anchor;
        r.intent = "proceed straight through the signalized intersection";
        r.perception_summary =
            "approaching intersection; requesting signal state, objects and alerts";
        r.t_now_us = t_now;
        r.horizon_s = max_horizon;
        ctx = engine.retrieve(r);
      } else {
        ctx.payload_bytes = 0;  // nothing is transmitted in this arm
      }

      ReasoningContext rctx = fuse_vehicle_context(vstate, ctx, max_horizon);
      if (!retrieval_on) {
        // the vehicle-side model sees only its own state
        rctx.summary.signal_state.reset();
        rctx.summary.objects.clear();
        rctx.summary.alerts.clear();
      }
      PlanOutput p = plan(rctx, planner);
      Trajectory2D pred = integrate_plan(vstate, p);

      const std::size_t n_future =
          static_cast<std::size_t>(std::llround(max_horizon * 10.0));
      Trajectory2D gt = slice_rebased(s.ego_truth, tick, n_future);

      CollisionScenario cs;
      cs.pred = pred;
      for (const auto& [id, traj] : s.agent_truth) {
        cs.agents.push_back(slice_rebased(traj, tick, n_future));
      }
      collision_scenarios.push_back(cs);

      for (double h : opts.horizons_s) {
        const double l2 = l2_error(pred, gt, h);
        result.l2_m[h] = l2;
        l2_samples[h].push_back(l2);
        const double comfort = comfort_score(pred, h, opts.comfort);
        result.comfort[h] = comfort;
        comfort_samples[h].push_back(comfort);
      }

      bool hit = false;
      for (const auto& agent : cs.agents) {
        const std::size_t n = std::min(pred.points.size(), agent.points.size());
        for (std::size_t i = 0; i < n && !hit; ++i) {
          if (std::hypot(pred.points[i].x_m - agent.points[i].x_m,
                         pred.points[i].y_m - agent.points[i].y_m) <
              opts.collision_radius_m) {
            hit = true;
          }
        }
      }
      result.collided = hit;

      // stop-line violation: crossing the line while the signal shows red
      const double stop_x = s.stop_line_x();
      if (vstate.ego_anchor.x_m < stop_x) {
        for (std::size_t i = 1; i < pred.points.size(); ++i) {
          const std::int64_t t_abs =
              t_now + static_cast<std::int64_t>(
                          std::llround(pred.points[i].t_offset_s * 1e6));
          if (pred.points[i].x_m > stop_x && s.signal_at(t_abs) == "red") {
            result.stopline_violation = true;
            break;
          }
        }
      }
      result.transmission_bytes = ctx.payload_bytes;
      tx_samples.push_back(ctx.payload_bytes);
    } catch (const std::exception& ex) {
      result.error = ex.what();
    }
    report.scenarios.push_back(std::move(result));
  }

  std::sort(report.scenarios.begin(), report.scenarios.end(),
            [](const ScenarioResult& a, const ScenarioResult& b) {
              return a.scenario_id < b.scenario_id;
            });

  auto mean = [](const std::vector<double>& xs) {
    return xs.empty() ? 0.0
                      : std::accumulate(xs.begin(), xs.end(), 0.0) /
                            static_cast<double>(xs.size());
  };
  for (double h : opts.horizons_s) {
    report.l2_m[h] = mean(l2_samples[h]);
    report.comfort[h] = mean(comfort_samples[h]);
  }
  double l2_sum = 0.0;
  for (const auto& [h, v] : report.l2_m) l2_sum += v;
  report.l2_avg_m =
      report.l2_m.empty() ? 0.0 : l2_sum / static_cast<double>(report.l2_m.size());
  if (!collision_scenarios.empty()) {
    report.collision_rate_pct =
        collision_rate(collision_scenarios, max_horizon, opts.collision_radius_m);
  }
  if (!tx_samples.empty()) {
    std::size_t total = std::accumulate(tx_samples.begin(), tx_samples.end(),
                                        std::size_t{0});
    report.transmission_bytes = total / tx_samples.size();
  }
  for (const auto& r : report.scenarios) {
    if (r.error.empty() && r.stopline_violation) ++report.stopline_violations;
  }
  report.n_scenarios = static_cast<int>(
      std::count_if(report.scenarios.begin(), report.scenarios.end(),
                    [](const ScenarioResult& r) { return r.error.empty(); }));
  return report;
}

namespace {

json horizon_map_to_json(const std::map<double, double>& m) {
  json out = json::object();
  for (const auto& [h, v] : m) out[canonical_number(h)] = v;
  return out;
}

std::map<double, double> horizon_map_from_json(const json& j) {
  std::map<double, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out[std::stod(it.key())] = it.value().get<double>();
  }
  return out;
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  json j;
  j["arm"] = r.arm;
  j["l2_m"] = horizon_map_to_json(r.l2_m);
  j["l2_avg_m"] = r.l2_avg_m;
  j["collision_rate_pct"] = r.collision_rate_pct;
  j["comfort"] = horizon_map_to_json(r.comfort);
  j["transmission_bytes"] = r.transmission_bytes;
  j["stopline_violations"] = r.stopline_violations;
  j["n_scenarios"] = r.n_scenarios;
  json rows = json::array();
  for (const auto& sr : r.scenarios) {
    json row;
    row["scenario_id"] = sr.scenario_id;
    row["l2_m"] = horizon_map_to_json(sr.l2_m);
    row["comfort"] = horizon_map_to_json(sr.comfort);
    row["collided"] = sr.collided;
    row["stopline_violation"] = sr.stopline_violation;
    row["transmission_bytes"] = sr.transmission_bytes;
    row["error"] = sr.error;
    rows.push_back(std::move(row));
  }
  j["scenarios"] = std::move(rows);
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  MetricsReport r;
  r.arm = j.at("arm").get<std::string>();
  r.l2_m = horizon_map_from_json(j.at("l2_m"));
  r.l2_avg_m = j.at("l2_avg_m").get<double>();
  r.collision_rate_pct = j.at("collision_rate_pct").get<double>();
  r.comfort = horizon_map_from_json(j.at("comfort"));
  r.transmission_bytes = j.at("transmission_bytes").get<std::size_t>();
  r.stopline_violations = j.at("stopline_violations").get<int>();
  r.n_scenarios = j.at("n_scenarios").get<int>();
  for (const auto& row : j.at("scenarios")) {
    ScenarioResult sr;
    sr.scenario_id = row.at("scenario_id").get<std::string>();
    sr.l2_m = horizon_map_from_json(row.at("l2_m"));
    sr.comfort = horizon_map_from_json(row.at("comfort"));
    sr.collided = row.at("collided").get<bool>();
    sr.stopline_violation = row.at("stopline_violation").get<bool>();
    sr.transmission_bytes = row.at("transmission_bytes").get<std::size_t>();
    sr.error = row.at("error").get<std::string>();
    r.scenarios.push_back(std::move(sr));
  }
  return r;
}

std::string render_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line),
                "%-14s %28s %9s %28s %10s %6s %4s\n"
                "%-14s %6s %6s %6s %7s %9s %6s %6s %6s %7s %10s %6s %4s\n",
                "", "L2 Error (m)", "Coll.", "Comfort Score", "Tx", "Stop",
                "N", "arm", "2.5s", "3.5s", "4.5s", "Avg", "rate %", "2.5s",
                "3.5s", "4.5s", "Avg", "bytes", "viol.", "");
  os << line;
  for (const auto& r : reports) {
    auto at = [&r](double h, const std::map<double, double>& m) {
      auto it = m.find(h);
      return it == m.end() ? 0.0 : it->second;
    };
    double comfort_avg = 0.0;
    for (const auto& [h, v] : r.comfort) comfort_avg += v;
    if (!r.comfort.empty()) comfort_avg /= static_cast<double>(r.comfort.size());
    std::snprintf(line, sizeof(line),
                  "%-14s %6.2f %6.2f %6.2f %7.2f %9.2f %6.2f %6.2f %6.2f %7.2f "
                  "%10zu %6d %4d\n",
                  r.arm.c_str(), at(2.5, r.l2_m), at(3.5, r.l2_m),
                  at(4.5, r.l2_m), r.l2_avg_m, r.collision_rate_pct,
                  at(2.5, r.comfort), at(3.5, r.comfort), at(4.5, r.comfort),
                  comfort_avg, r.transmission_bytes, r.stopline_violations,
                  r.n_scenarios);
    os << line;
  }
  if (reports.size() == 2) {
    std::snprintf(line, sizeof(line),
                  "diff(%s - %s): stop-line violations %+d, L2 avg %+.2f m, "
                  "collision rate %+.2f%%\n",
                  reports[0].arm.c_str(), reports[1].arm.c_str(),
                  reports[0].stopline_violations - reports[1].stopline_violations,
                  reports[0].l2_avg_m - reports[1].l2_avg_m,
                  reports[0].collision_rate_pct - reports[1].collision_rate_pct);
    os << line;
  }
  return os.str();
}

}  // namespace unipool
