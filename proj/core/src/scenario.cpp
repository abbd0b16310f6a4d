#include "unipool/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "unipool/json_codec.hpp"
#include "unipool/query_engine.hpp"
#include "unipool/rng.hpp"

namespace unipool {

using nlohmann::json;

namespace {

constexpr double kLaneOffsetM = 1.75;
constexpr double kStopLineM = 6.0;
constexpr double kTickS = 0.1;

enum class Approach { Eastbound, Westbound, Southbound, Northbound };

struct MovingBody {
  Approach approach;
  double pos;      // signed progress coordinate along the travel axis
  double speed;
  double cruise;
  bool obeys_signal;
  bool braking = false;  // latched until stopped or the light turns green
};

double axis_x(const MovingBody& b) {
  switch (b.approach) {
    case Approach::Eastbound: return b.pos;
    case Approach::Westbound: return b.pos;
    case Approach::Southbound: return kLaneOffsetM;
    case Approach::Northbound: return -kLaneOffsetM;
  }
  return 0.0;
}

double axis_y(const MovingBody& b) {
  switch (b.approach) {
    case Approach::Eastbound: return -kLaneOffsetM;
    case Approach::Westbound: return kLaneOffsetM;
    case Approach::Southbound: return b.pos;
    case Approach::Northbound: return b.pos;
  }
  return 0.0;
}

double heading_of(Approach a) {
  switch (a) {
    case Approach::Eastbound: return 0.0;
    case Approach::Westbound: return M_PI;
    case Approach::Southbound: return -M_PI_2;
    case Approach::Northbound: return M_PI_2;
  }
  return 0.0;
}

// distance remaining to this approach's stop line; negative once committed
double dist_to_stop(const MovingBody& b) {
  switch (b.approach) {
    case Approach::Eastbound: return -kStopLineM - b.pos;
    case Approach::Westbound: return b.pos - kStopLineM;
    case Approach::Southbound: return b.pos - kStopLineM;
    case Approach::Northbound: return -kStopLineM - b.pos;
  }
  return 0.0;
}

bool moves_positive(Approach a) {
  return a == Approach::Eastbound || a == Approach::Northbound;
}

bool is_ew(Approach a) {
  return a == Approach::Eastbound || a == Approach::Westbound;
}

// One 10 Hz step of the shared signal-compliance logic (also used by the
// ground-truth ego so the truth stays dynamically consistent).
void step_body(MovingBody& b, bool my_signal_red) {
  constexpr double kBrake = 3.0;
  constexpr double kAccel = 2.0;
  const double gap = dist_to_stop(b);
  const bool red_ahead = b.obeys_signal && my_signal_red && gap > 0.0;
  if (red_ahead && gap <= b.speed * b.speed / (2.0 * kBrake) + b.speed * kTickS) {
    b.speed = std::max(0.0, b.speed - kBrake * kTickS);
  } else if (!red_ahead && b.speed < b.cruise) {
    // never accelerate toward a red light; resume on green
    b.speed = std::min(b.cruise, b.speed + kAccel * kTickS);
  }
  b.pos += (moves_positive(b.approach) ? 1.0 : -1.0) * b.speed * kTickS;
}

std::string format_m(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(duration_s > 0.0)) {
    throw std::invalid_argument("scenario: duration_s must be positive");
  }
  if (n_agents < 0) {
    throw std::invalid_argument("scenario: n_agents must be >= 0");
  }
  if (signal_plan.empty()) {
    throw std::invalid_argument("scenario: signal_plan must be non-empty");
  }
  for (const auto& p : signal_plan) {
    if (!(p.duration_s > 0.0)) {
      throw std::invalid_argument("scenario: signal phase durations must be positive");
    }
  }
  if (t_base_us <= 0 || t_base_us % 1'000'000 != 0) {
    throw std::invalid_argument("scenario: t_base_us must be a positive whole second");
  }
}

std::string Scenario::signal_at(std::int64_t t_us) const {
  double cycle = 0.0;
  for (const auto& p : config.signal_plan) cycle += p.duration_s;
  double offset_s = static_cast<double>(t_us - config.t_base_us) / 1e6;
  if (offset_s < 0.0) offset_s = 0.0;
  offset_s = std::fmod(offset_s, cycle);
  for (const auto& p : config.signal_plan) {
    if (offset_s < p.duration_s) return p.phase;
    offset_s -= p.duration_s;
  }
  return config.signal_plan.back().phase;
}

double Scenario::stop_line_x() const { return -kStopLineM; }

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Scenario s;
  s.config = config;

  const int n_ticks = static_cast<int>(std::llround(config.duration_s * 10.0));

  auto make_entry = [&](std::uint64_t id, double x, double y,
                        const std::string& key, const std::string& text) {
    KnowledgeEntry e;
    e.entry_id = id;
    e.anchor = {config.intersection_id, x, y};
    e.timestamp_us = config.t_base_us;
    e.fields.emplace(key, FieldValue::str(text));
    e.reason = "surveyed map element";
    e.prediction = "";
    e.partition = Partition::Static;
    return e;
  };
  s.static_elements.push_back(make_entry(
      1, 0.0, 0.0, "road_geometry",
      "four-way intersection with one lane per direction on each approach"));
  s.static_elements.push_back(make_entry(
      2, 0.0, 0.0, "lane_markings",
      "solid stop lines and dashed center lines on all approaches"));
  s.static_elements.push_back(make_entry(
      3, -20.0, -5.0, "traffic_signs", "speed limit 50 posted on the west approach"));
  s.static_elements.push_back(make_entry(
      4, -kStopLineM, -kLaneOffsetM, "map_feature",
      "signalized stop line 6 m west of the intersection center"));
  s.static_elements.push_back(make_entry(
      5, 0.0, 0.0, "map_feature", "crosswalks across all four approaches"));

  // signal truth at 10 Hz
  for (int k = 0; k < n_ticks; ++k) {
    const std::int64_t t_us = config.t_base_us + static_cast<std::int64_t>(k) * 100'000;
    s.signal_truth.emplace_back(t_us, s.signal_at(t_us));
  }

  // ego: westbound approach driving east, obeys the signal
  MovingBody ego;
  ego.approach = Approach::Eastbound;
  ego.pos = rng.uniform(-68.0, -61.0);
  ego.cruise = rng.uniform(9.0, 11.0);
  ego.speed = ego.cruise;
  ego.obeys_signal = true;

  std::vector<MovingBody> agents;
  for (int i = 0; i < config.n_agents; ++i) {
    MovingBody a;
    const int dir = static_cast<int>(rng.uniform_int(0, 3));
    a.approach = static_cast<Approach>(dir);
    const double start = rng.uniform(20.0, 80.0);
    a.pos = moves_positive(a.approach) ? -start : start;
    a.cruise = rng.uniform(5.0, 12.0);
    a.speed = a.cruise;
    a.obeys_signal = rng.chance(0.5);
    agents.push_back(a);
  }

  auto traj_point = [](const MovingBody& b, double t_offset) {
    return TrajectoryPoint{t_offset, axis_x(b), axis_y(b), heading_of(b.approach)};
  };

  s.ego_truth.dt_s = kTickS;
  s.ego_truth.points.push_back(traj_point(ego, 0.0));
  std::vector<Trajectory2D> agent_trajs(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agent_trajs[i].dt_s = kTickS;
    agent_trajs[i].points.push_back(traj_point(agents[i], 0.0));
  }

  for (int k = 0; k < n_ticks; ++k) {
    const std::int64_t t_us = config.t_base_us + static_cast<std::int64_t>(k) * 100'000;
    const bool ew_red = s.signal_at(t_us) == "red";
    const double t_next = (k + 1) * kTickS;
    step_body(ego, ew_red);
    s.ego_truth.points.push_back(traj_point(ego, t_next));
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const bool my_red = is_ew(agents[i].approach) ? ew_red : !ew_red;
      step_body(agents[i], my_red);
      agent_trajs[i].points.push_back(traj_point(agents[i], t_next));
    }
  }

  for (std::size_t i = 0; i < agents.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "agent_%02zu", i);
    s.agent_truth.emplace(name, std::move(agent_trajs[i]));
  }
  return s;
}

std::vector<RawRecord> emit_records(const Scenario& s) {
  const ScenarioConfig& cfg = s.config;
  const int n_ticks = static_cast<int>(std::llround(cfg.duration_s * 10.0));
  std::vector<RawRecord> out;
  out.reserve(static_cast<std::size_t>(n_ticks) * (2 + s.agent_truth.size()));

  // static map elements, once at the scenario clock origin
  for (const auto& e : s.static_elements) {
    RawRecord r;
    r.source_id = "rsu_map";
    r.modality = Modality::ImageSemantic;
    r.timestamp_us = cfg.t_base_us;
    r.anchor = e.anchor;
    r.payload = e.fields;
    r.calibration_frame = "unified";
    out.push_back(std::move(r));
  }

  for (int k = 0; k < n_ticks; ++k) {
    const std::int64_t t_us = cfg.t_base_us + static_cast<std::int64_t>(k) * 100'000;
    const std::string phase = s.signal_at(t_us);

    RawRecord sig;
    sig.source_id = "rsu_signal";
    sig.modality = Modality::Structured;
    sig.timestamp_us = t_us;
    sig.anchor = {cfg.intersection_id, -kStopLineM, -kLaneOffsetM};
    sig.payload.emplace("signal_state", FieldValue::str(phase));
    sig.calibration_frame = "unified";
    out.push_back(std::move(sig));

    for (const auto& [agent_id, traj] : s.agent_truth) {
      const TrajectoryPoint& p = traj.points[static_cast<std::size_t>(k)];
      const TrajectoryPoint& pn = traj.points[static_cast<std::size_t>(k) + 1];
      const double speed = std::hypot(pn.x_m - p.x_m, pn.y_m - p.y_m) / traj.dt_s;
      RawRecord r;
      r.source_id = "rsu_tracker/" + agent_id;
      r.modality = Modality::LidarSummary;
      r.timestamp_us = t_us;
      r.anchor = {cfg.intersection_id, p.x_m, p.y_m};
      std::ostringstream tj;
      tj << "car (" << format_m(p.x_m) << "," << format_m(p.y_m) << ") v"
         << format_m(speed) << " h" << format_m(p.heading_rad);
      r.payload.emplace("trajectory", FieldValue::str(tj.str()));
      r.payload.emplace("velocity", FieldValue::num(speed, "m/s"));
      r.payload.emplace("object_type", FieldValue::str("car"));
      r.calibration_frame = "unified";
      out.push_back(std::move(r));
    }

    if (k % 10 == 0) {
      // 1 Hz aggregated context
      int nearby = 0;
      double nearest = 1e9;
      double nearest_x = 0.0, nearest_y = 0.0;
      for (const auto& [agent_id, traj] : s.agent_truth) {
        const TrajectoryPoint& p = traj.points[static_cast<std::size_t>(k)];
        const double d = std::hypot(p.x_m, p.y_m);
        if (d <= 50.0) ++nearby;
        if (d < nearest) {
          nearest = d;
          nearest_x = p.x_m;
          nearest_y = p.y_m;
        }
      }

      RawRecord density;
      density.source_id = "rsu_stats";
      density.modality = Modality::Structured;
      density.timestamp_us = t_us;
      density.anchor = {cfg.intersection_id, 0.0, 0.0};
      density.payload.emplace("density", FieldValue::num(nearby, "vehicles"));
      density.calibration_frame = "unified";
      out.push_back(std::move(density));

      RawRecord context;
      context.source_id = "rsu_camera";
      context.modality = Modality::ImageSemantic;
      context.timestamp_us = t_us;
      context.anchor = {cfg.intersection_id, 0.0, 0.0};
      std::ostringstream obj;
      if (s.agent_truth.empty()) {
        obj << "no tracked vehicles near the intersection at second " << (k / 10);
      } else {
        obj << nearby << " vehicles within 50 m; nearest car at ("
            << format_m(nearest_x) << ", " << format_m(nearest_y) << ")";
      }
      context.payload.emplace("objects", FieldValue::str(obj.str()));
      context.payload.emplace("weather", FieldValue::str("clear"));
      context.payload.emplace(
          "traffic_conditions",
          FieldValue::str(nearby >= 3 ? "busy intersection traffic"
                                      : "light intersection traffic"));
      if (cfg.include_construction) {
        context.payload.emplace(
            "construction",
            FieldValue::str("lane closure on the north approach, cones present"));
      }
      if (cfg.include_abnormal_event) {
        context.payload.emplace(
            "abnormal_event",
            FieldValue::str("stalled vehicle blocking the east approach shoulder"));
      }
      context.calibration_frame = "unified";
      out.push_back(std::move(context));
    }
  }
  return out;
}

std::vector<Scenario> red_light_corpus(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("red_light_corpus: n must be >= 1");
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ScenarioConfig cfg;
    cfg.seed = seed + static_cast<std::uint64_t>(i) * 1000003ULL;
    cfg.n_agents = 0;  // the red light alone separates the retrieval arms
    cfg.duration_s = 10.0;
    char iid[32];
    std::snprintf(iid, sizeof(iid), "redlight_%03d", i);
    cfg.intersection_id = iid;
    cfg.signal_plan = {{"red", 30.0}};
    out.push_back(generate(cfg));
  }
  return out;
}

namespace {

json trajectory_to_json(const Trajectory2D& t) {
  json pts = json::array();
  for (const auto& p : t.points) {
    pts.push_back(json::array({p.t_offset_s, p.x_m, p.y_m, p.heading_rad}));
  }
  return json{{"dt_s", t.dt_s}, {"points", pts}};
}

Trajectory2D trajectory_from_json(const json& j) {
  Trajectory2D t;
  t.dt_s = j.at("dt_s").get<double>();
  for (const auto& p : j.at("points")) {
    t.points.push_back(
        {p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>()});
  }
  return t;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json j;
  json plan = json::array();
  for (const auto& p : s.config.signal_plan) {
    plan.push_back(json{{"phase", p.phase}, {"duration_s", p.duration_s}});
  }
  j["config"] = json{{"seed", s.config.seed},
                     {"n_agents", s.config.n_agents},
                     {"duration_s", s.config.duration_s},
                     {"intersection_id", s.config.intersection_id},
                     {"signal_plan", plan},
                     {"include_construction", s.config.include_construction},
                     {"include_abnormal_event", s.config.include_abnormal_event},
                     {"t_base_us", s.config.t_base_us}};
  json statics = json::array();
  for (const auto& e : s.static_elements) {
    statics.push_back(json::parse(knowledge_entry_to_json(e)));
  }
  j["static_elements"] = statics;
  json agents = json::object();
  for (const auto& [id, traj] : s.agent_truth) {
    agents[id] = trajectory_to_json(traj);
  }
  j["agent_truth"] = agents;
  json sig = json::array();
  for (const auto& [t, phase] : s.signal_truth) {
    sig.push_back(json::array({t, phase}));
  }
  j["signal_truth"] = sig;
  j["ego_truth"] = trajectory_to_json(s.ego_truth);
  return j.dump();
}

Scenario scenario_from_json(const std::string& text) {
  const json j = json::parse(text);
  Scenario s;
  const json& jc = j.at("config");
  s.config.seed = jc.at("seed").get<std::uint64_t>();
  s.config.n_agents = jc.at("n_agents").get<int>();
  s.config.duration_s = jc.at("duration_s").get<double>();
  s.config.intersection_id = jc.at("intersection_id").get<std::string>();
  s.config.signal_plan.clear();
  for (const auto& p : jc.at("signal_plan")) {
    s.config.signal_plan.push_back(
        {p.at("phase").get<std::string>(), p.at("duration_s").get<double>()});
  }
  s.config.include_construction = jc.value("include_construction", false);
  s.config.include_abnormal_event = jc.value("include_abnormal_event", false);
  s.config.t_base_us = jc.value("t_base_us", std::int64_t{1'000'000});
  for (const auto& je : j.at("static_elements")) {
    s.static_elements.push_back(knowledge_entry_from_json(je.dump()));
  }
  for (auto it = j.at("agent_truth").begin(); it != j.at("agent_truth").end(); ++it) {
    s.agent_truth.emplace(it.key(), trajectory_from_json(it.value()));
  }
  for (const auto& p : j.at("signal_truth")) {
    s.signal_truth.emplace_back(p[0].get<std::int64_t>(), p[1].get<std::string>());
  }
  s.ego_truth = trajectory_from_json(j.at("ego_truth"));
  return s;
}

}  // namespace unipool
