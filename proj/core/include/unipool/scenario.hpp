#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unipool/types.hpp"

namespace unipool {

struct SignalPhase {
  std::string phase;  // "red" | "green" for the ego approach
  double duration_s = 5.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int n_agents = 3;
  double duration_s = 10.0;
  std::string intersection_id = "intersection_001";
  std::vector<SignalPhase> signal_plan = {{"green", 5.0}, {"red", 5.0}};
  bool include_construction = false;
  bool include_abnormal_event = false;
  // Scenario clock origin; keeps every emitted timestamp positive and on
  // both the 10 Hz and 1 Hz grids.
  std::int64_t t_base_us = 1'000'000;

  void validate() const;
};

// Synthetic 4-way intersection episode: static map elements, 10 Hz agent and
// signal truth, 1 Hz context truth, plus a signal-compliant ego trace.
struct Scenario {
  ScenarioConfig config;
  std::vector<KnowledgeEntry> static_elements;
  std::map<std::string, Trajectory2D> agent_truth;
  std::vector<std::pair<std::int64_t, std::string>> signal_truth;  // 10 Hz
  Trajectory2D ego_truth;

  std::string signal_at(std::int64_t t_us) const;
  // Stop line for the westbound ego approach, x coordinate in meters.
  double stop_line_x() const;
};

// Deterministic given config.seed. Agents run constant-velocity or
// stop-at-red behaviors on the intersection lattice; the ego obeys the same
// signal logic so the ground truth is dynamically consistent.
Scenario generate(const ScenarioConfig& config);

// Structured and semantic records for the whole episode: agent state and
// signal phase at 10 Hz, density and scene context at 1 Hz, static elements
// once at t_base. Timestamps are exact grid multiples.
std::vector<RawRecord> emit_records(const Scenario& s);

// Scenarios whose ground-truth ego stops at a red light observable only via
// infrastructure records: retrieval-on planning can stop, retrieval-off
// cannot.
std::vector<Scenario> red_light_corpus(int n, std::uint64_t seed);

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

}  // namespace unipool
