#include "unipool/reasoner.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "unipool/json_codec.hpp"

namespace unipool {

using nlohmann::json;

void VehicleState::validate() const {
  if (!ego_anchor.valid()) {
    throw std::invalid_argument("vehicle state: malformed ego anchor");
  }
  auto check_sorted = [](const auto& hist, const char* what) {
    for (std::size_t i = 1; i < hist.size(); ++i) {
      if (hist[i].first <= hist[i - 1].first) {
        throw std::invalid_argument(std::string("vehicle state: ") + what +
                                    " history not time-sorted");
      }
    }
  };
  check_sorted(speed_history, "speed");
  check_sorted(curvature_history, "curvature");
  for (const auto& [t, v] : speed_history) {
    if (v < 0.0) throw std::invalid_argument("vehicle state: negative speed");
  }
  for (const auto& [t, k] : curvature_history) {
    if (std::abs(k) > 1.0) {
      throw std::invalid_argument("vehicle state: |curvature| > 1.0");
    }
  }
}

double VehicleState::last_speed() const {
  return speed_history.empty() ? 0.0 : speed_history.back().second;
}

double VehicleState::last_curvature() const {
  return curvature_history.empty() ? 0.0 : curvature_history.back().second;
}

void PlanOutput::validate() const {
  if (frames.empty()) throw std::invalid_argument("plan: no frames");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double expected = 0.1 * static_cast<double>(i + 1);
    if (std::abs(frames[i].t_offset_s - expected) > 1e-9) {
      throw std::invalid_argument("plan: frame offsets must be 0.1s steps from 0.1s");
    }
    if (!(frames[i].speed_mps >= 0.0) || !std::isfinite(frames[i].speed_mps)) {
      throw std::invalid_argument("plan: speeds must be finite and >= 0");
    }
    if (!std::isfinite(frames[i].curvature_inv_m)) {
      throw std::invalid_argument("plan: curvature must be finite");
    }
  }
}

namespace {

struct PayloadEntry {
  FieldMap fields;
  std::string reason;
  std::string prediction;
  std::int64_t t_us = 0;
};

std::vector<PayloadEntry> parse_section(const json& j, const char* name) {
  if (!j.is_array()) {
    throw std::runtime_error(std::string("malformed payload section '") + name +
                             "': expected an array");
  }
  std::vector<PayloadEntry> out;
  for (const auto& je : j) {
    if (!je.is_object() || !je.contains("fields") || !je.contains("reason") ||
        !je.contains("prediction") || !je.contains("t_us")) {
      throw std::runtime_error(std::string("malformed payload section '") + name +
                               "': entry is missing keys");
    }
    PayloadEntry e;
    for (auto it = je.at("fields").begin(); it != je.at("fields").end(); ++it) {
      if (it.value().is_string()) {
        e.fields.emplace(it.key(), FieldValue::str(it.value().get<std::string>()));
      } else if (it.value().is_number()) {
        e.fields.emplace(it.key(), FieldValue::num(it.value().get<double>()));
      } else {
        throw std::runtime_error(std::string("malformed payload section '") +
                                 name + "': field values must be text or number");
      }
    }
    e.reason = je.at("reason").get<std::string>();
    e.prediction = je.at("prediction").get<std::string>();
    e.t_us = je.at("t_us").get<std::int64_t>();
    out.push_back(std::move(e));
  }
  return out;
}

void render_section(std::ostringstream& doc, const char* title,
                    const std::vector<PayloadEntry>& entries) {
  doc << "[" << title << "]\n";
  if (entries.empty()) {
    doc << "(none)\n";
    return;
  }
  for (const auto& e : entries) {
    doc << "- t_us=" << e.t_us << "; ";
    bool first = true;
    for (const auto& [k, v] : e.fields) {
      doc << (first ? "" : "; ") << k << "=";
      if (v.is_text()) {
        doc << v.text;
      } else {
        doc << canonical_number(v.number);
      }
      first = false;
    }
    if (!e.reason.empty()) doc << "; reason: " << e.reason;
    if (!e.prediction.empty()) doc << "; prediction: " << e.prediction;
    doc << "\n";
  }
}

}  // namespace

ReasoningContext fuse_vehicle_context(const VehicleState& v,
                                      const std::string& payload_json,
                                      double horizon_s) {
  v.validate();
  const json j = json::parse(payload_json, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::runtime_error("malformed payload: not a JSON object");
  }
  auto statics = parse_section(j.value("static", json::array()), "static");
  auto low = parse_section(j.value("low_freq", json::array()), "low_freq");
  auto high = parse_section(j.value("high_freq", json::array()), "high_freq");

  ReasoningContext ctx;
  ctx.vehicle = v;
  ctx.horizon_s = horizon_s;
  ctx.summary.ego_distance_to_intersection_m =
      std::hypot(v.ego_anchor.x_m, v.ego_anchor.y_m);

  // summary: newest signal_state wins; objects and alerts accumulate in
  // static -> low -> high order
  std::int64_t best_signal_t = std::numeric_limits<std::int64_t>::min();
  auto scan = [&](const std::vector<PayloadEntry>& entries) {
    for (const auto& e : entries) {
      for (const auto& [k, val] : e.fields) {
        if (!val.is_text()) continue;
        if (k == "signal_state" && e.t_us > best_signal_t) {
          ctx.summary.signal_state = val.text;
          best_signal_t = e.t_us;
        } else if (k == "objects") {
          ctx.summary.objects.push_back(val.text);
        } else if (k == "alert") {
          ctx.summary.alerts.push_back(val.text);
        }
      }
    }
  };
  scan(statics);
  scan(low);
  scan(high);

  std::ostringstream doc;
  doc << "[vehicle]\n";
  doc << "intersection: " << v.ego_anchor.intersection_id << "\n";
  doc << "position_m: (" << canonical_number(v.ego_anchor.x_m) << ", "
      << canonical_number(v.ego_anchor.y_m) << ")\n";
  doc << "heading_rad: " << canonical_number(v.heading_rad) << "\n";
  doc << "speed_history_mps:";
  for (const auto& [t, s] : v.speed_history) doc << " " << canonical_number(s);
  doc << "\n";
  doc << "curvature_history_inv_m:";
  for (const auto& [t, c] : v.curvature_history) doc << " " << canonical_number(c);
  doc << "\n";
  render_section(doc, "static context", statics);
  render_section(doc, "low-frequency context", low);
  render_section(doc, "high-frequency context", high);
  doc << "[summary]\n";
  doc << "signal_state: " << ctx.summary.signal_state.value_or("(absent)") << "\n";
  doc << "distance_to_intersection_m: "
      << canonical_number(ctx.summary.ego_distance_to_intersection_m) << "\n";
  ctx.document = doc.str();
  return ctx;
}

ReasoningContext fuse_vehicle_context(const VehicleState& v,
                                      const FusedContext& e, double horizon_s) {
  return fuse_vehicle_context(v, canonical_payload(e), horizon_s);
}

PlanOutput plan(const ReasoningContext& ctx, Planner& planner) {
  PlanOutput out = planner.plan(ctx);
  out.validate();
  return out;
}

PlanOutput RuleBasedPlanner::plan(const ReasoningContext& ctx) {
  const double v0 = ctx.vehicle.last_speed();
  const double curvature = ctx.vehicle.last_curvature();

  double decel = 0.0;
  if (ctx.summary.signal_state == "red" &&
      ctx.summary.ego_distance_to_intersection_m <= params_.signal_radius_m) {
    decel = params_.signal_decel_mps2;
  }
  for (const auto& alert : ctx.summary.alerts) {
    if (alert.find("collision") != std::string::npos) {
      decel = params_.alert_decel_mps2;
      break;
    }
  }

  PlanOutput out;
  const int n = static_cast<int>(std::llround(ctx.horizon_s * 10.0));
  out.frames.reserve(n);
  for (int k = 1; k <= n; ++k) {
    PlanFrame f;
    f.t_offset_s = 0.1 * k;
    f.speed_mps = std::max(0.0, v0 - decel * 0.1 * k);
    f.curvature_inv_m = curvature;
    out.frames.push_back(f);
  }
  return out;
}

ExternalProcessPlanner::ExternalProcessPlanner(std::vector<std::string> argv)
    : argv_(std::move(argv)) {
  if (argv_.empty()) {
    throw std::invalid_argument("external planner: empty argv");
  }
}

PlanOutput ExternalProcessPlanner::plan(const ReasoningContext& ctx) {
  int in_pipe[2];   // parent -> child stdin
  int out_pipe[2];  // child stdout -> parent
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
    throw std::runtime_error("external planner: pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("external planner: fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);

  std::string request = ctx.document;
  if (request.empty() || request.back() != '\n') request.push_back('\n');
  request.push_back('\n');  // blank line terminates the request
  const char* p = request.data();
  std::size_t left = request.size();
  while (left > 0) {
    const ssize_t n = ::write(in_pipe[1], p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::close(in_pipe[1]);

  std::string response;
  char buf[4096];
  while (true) {
    const ssize_t n = ::read(out_pipe[0], buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    response.append(buf, static_cast<std::size_t>(n));
  }
  ::close(out_pipe[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw std::runtime_error("external planner: process failed");
  }
  return plan_output_from_json(response);
}

}  // namespace unipool
