#include "unipool/query_engine.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace unipool {

void QueryRequirement::validate() const {
  if (intent.empty() && perception_summary.empty()) {
    throw std::invalid_argument(
        "requirement: intent and perception_summary are both empty");
  }
  if (!(horizon_s > 0.0)) {
    throw std::invalid_argument("requirement: horizon_s must be positive");
  }
  if (!ego_anchor.valid()) {
    throw std::invalid_argument("requirement: malformed ego anchor");
  }
}

double QueryVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

std::uint64_t fnv1a64(const std::string& token) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> tokenize_for_encoding(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      if (cur.size() >= 2) out.push_back(cur);
      cur.clear();
    }
  }
  if (cur.size() >= 2) out.push_back(cur);
  return out;
}

namespace {

void accumulate_tokens(const std::string& text, std::vector<double>& acc) {
  const int d = static_cast<int>(acc.size());
  for (const auto& tok : tokenize_for_encoding(text)) {
    const std::uint64_t h = fnv1a64(tok);
    const int bucket = static_cast<int>(h % static_cast<std::uint64_t>(d));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    acc[bucket] += sign;
  }
}

void l2_normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  if (s <= 0.0) return;  // zero vector stays zero
  const double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
}

}  // namespace

QueryEngine::QueryEngine(const PoolStore& store, RetrievalConfig cfg)
    : store_(store), cfg_(cfg) {
  if (cfg_.dim < 1) throw std::invalid_argument("retrieval dim must be >= 1");
}

QueryVector QueryEngine::encode(const QueryRequirement& r) const {
  r.validate();
  std::vector<double> acc(static_cast<std::size_t>(cfg_.dim), 0.0);
  accumulate_tokens(r.intent, acc);
  accumulate_tokens(r.perception_summary, acc);
  l2_normalize(acc);
  return {std::move(acc)};
}

std::vector<double> QueryEngine::embed_text_features(
    const std::vector<std::string>& parts) const {
  std::vector<double> acc(static_cast<std::size_t>(cfg_.dim), 0.0);
  for (const auto& p : parts) accumulate_tokens(p, acc);
  l2_normalize(acc);
  return acc;
}

const std::vector<double>& QueryEngine::embed_entry(const KnowledgeEntry& e) const {
  if (e.embedding) return *e.embedding;
  {
    std::lock_guard lock(cache_mu_);
    auto it = embed_cache_.find(e.entry_id);
    if (it != embed_cache_.end()) {
      e.embedding = it->second;
      return *e.embedding;
    }
  }
  std::vector<std::string> parts;
  parts.reserve(e.fields.size() * 2 + 2);
  for (const auto& [key, value] : e.fields) {
    parts.push_back(key);
    if (value.is_text()) parts.push_back(value.text);
  }
  parts.push_back(e.reason);
  parts.push_back(e.prediction);
  std::vector<double> emb = embed_text_features(parts);
  {
    std::lock_guard lock(cache_mu_);
    embed_cache_.emplace(e.entry_id, emb);
  }
  e.embedding = std::move(emb);
  return *e.embedding;
}

std::vector<ScoredEntry> QueryEngine::search(const QueryVector& q,
                                             Partition partition,
                                             const QueryRequirement& r,
                                             int k) const {
  if (k < 1) throw std::invalid_argument("search: k must be >= 1");
  WindowQuery wq;
  wq.partition = partition;
  wq.intersection_id = r.ego_anchor.intersection_id;
  wq.t1_us = r.t_now_us;
  switch (partition) {
    case Partition::Static:
      wq.t0_us = 0;
      break;
    case Partition::HF:
      wq.t0_us = r.t_now_us - static_cast<std::int64_t>(cfg_.lookback_hf_s * 1e6);
      break;
    case Partition::SF:
      wq.t0_us = r.t_now_us - static_cast<std::int64_t>(cfg_.lookback_sf_s * 1e6);
      break;
  }
  wq.t0_us = std::max<std::int64_t>(wq.t0_us, 0);
  wq.limit = cfg_.max_candidates;

  std::vector<ScoredEntry> scored;
  for (KnowledgeEntry& e : store_.query_window(wq)) {
    if (anchor_distance_m(e.anchor, r.ego_anchor) > cfg_.rho_m) continue;
    const std::vector<double>& emb = embed_entry(e);
    double dot = 0.0;
    for (int i = 0; i < cfg_.dim; ++i) dot += q.values[i] * emb[i];
    const double cosine = std::max(0.0, dot);
    double decay = 1.0;
    const double dt_s = static_cast<double>(r.t_now_us - e.timestamp_us) / 1e6;
    if (partition == Partition::HF) {
      decay = std::exp(-dt_s / cfg_.tau_hf_s);
    } else if (partition == Partition::SF) {
      decay = std::exp(-dt_s / cfg_.tau_sf_s);
    }
    const double score = cosine * decay;
    if (score <= 0.0) continue;
    scored.push_back({std::move(e), score});
  }
  std::sort(scored.begin(), scored.end(),
            [](const ScoredEntry& a, const ScoredEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.entry.timestamp_us != b.entry.timestamp_us) {
                return a.entry.timestamp_us > b.entry.timestamp_us;
              }
              return a.entry.entry_id < b.entry.entry_id;
            });
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(k);
  return scored;
}

namespace {

std::string escape_json(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

void append_section(std::string& out, const std::vector<ScoredEntry>& section) {
  out.push_back('[');
  bool first = true;
  for (const auto& se : section) {
    if (!first) out.push_back(',');
    first = false;
    out += "{\"fields\":{";
    bool f0 = true;
    for (const auto& [key, value] : se.entry.fields) {
      if (!f0) out.push_back(',');
      f0 = false;
      out.push_back('"');
      out += escape_json(key);
      out += "\":";
      if (value.is_number()) {
        out += canonical_number(value.number);
      } else {
        out.push_back('"');
        out += escape_json(value.text);
        out.push_back('"');
      }
    }
    out += "},\"prediction\":\"";
    out += escape_json(se.entry.prediction);
    out += "\",\"reason\":\"";
    out += escape_json(se.entry.reason);
    out += "\",\"t_us\":";
    out += std::to_string(se.entry.timestamp_us);
    out.push_back('}');
  }
  out.push_back(']');
}

}  // namespace

std::string canonical_number(double v) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument("canonical payload numbers must be finite");
  }
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[40];
  // locale-independent %.6g: up to 6 significant digits, trailing zeros gone
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

std::string canonical_payload(const FusedContext& ctx) {
  // keys emitted in lexicographic order at every level
  std::string out;
  out.reserve(256 + ctx.total_entries() * 160);
  out += "{\"high_freq\":";
  append_section(out, ctx.high_freq_section);
  out += ",\"low_freq\":";
  append_section(out, ctx.low_freq_section);
  out += ",\"static\":";
  append_section(out, ctx.static_section);
  out += ",\"t_us\":";
  out += std::to_string(ctx.t_us);
  out += ",\"truncated\":";
  out += ctx.truncated ? "true" : "false";
  out.push_back('}');
  return out;
}

FusedContext QueryEngine::fuse(std::vector<ScoredEntry> e_static,
                               std::vector<ScoredEntry> e_hf,
                               std::vector<ScoredEntry> e_sf,
                               std::size_t budget_bytes,
                               std::int64_t t_now_us) {
  if (budget_bytes < 64) {
    throw std::invalid_argument("fuse: budget_bytes must be >= 64");
  }
  FusedContext ctx;
  ctx.t_us = t_now_us;

  // dedup by entry_id across sections, keeping the highest-scoring copy;
  // ties resolve to the earlier section in static -> SF -> HF order
  struct Slot {
    int section;  // 0 static, 1 sf, 2 hf
    double score;
  };
  std::map<std::uint64_t, Slot> best;
  auto consider = [&best](const std::vector<ScoredEntry>& sec, int idx) {
    for (const auto& se : sec) {
      auto it = best.find(se.entry.entry_id);
      if (it == best.end() || se.score > it->second.score) {
        best[se.entry.entry_id] = {idx, se.score};
      }
    }
  };
  consider(e_static, 0);
  consider(e_sf, 1);
  consider(e_hf, 2);

  auto take = [&best](std::vector<ScoredEntry>& src, int idx) {
    std::vector<ScoredEntry> kept;
    for (auto& se : src) {
      auto it = best.find(se.entry.entry_id);
      if (it != best.end() && it->second.section == idx) {
        kept.push_back(std::move(se));
        best.erase(it);  // drop duplicates inside one section too
      }
    }
    return kept;
  };
  ctx.static_section = take(e_static, 0);
  ctx.low_freq_section = take(e_sf, 1);
  ctx.high_freq_section = take(e_hf, 2);

  auto section_order = [](std::vector<ScoredEntry>& sec) {
    std::sort(sec.begin(), sec.end(),
              [](const ScoredEntry& a, const ScoredEntry& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.entry.timestamp_us != b.entry.timestamp_us) {
                  return a.entry.timestamp_us > b.entry.timestamp_us;
                }
                return a.entry.entry_id < b.entry.entry_id;
              });
  };
  section_order(ctx.static_section);
  section_order(ctx.low_freq_section);
  section_order(ctx.high_freq_section);

  std::string serialized = canonical_payload(ctx);
  if (serialized.size() > budget_bytes) {
    ctx.truncated = true;
    // drop globally lowest score first; ties drop the older, then the
    // larger id, the exact inverse of the keep order
    auto weakest = [](std::vector<ScoredEntry>* sec,
                      std::vector<ScoredEntry>* other1,
                      std::vector<ScoredEntry>* other2) {
      std::vector<ScoredEntry>* weakest_sec = nullptr;
      for (auto* s : {sec, other1, other2}) {
        if (s->empty()) continue;
        if (!weakest_sec) {
          weakest_sec = s;
          continue;
        }
        const ScoredEntry& a = s->back();
        const ScoredEntry& b = weakest_sec->back();
        const bool a_weaker =
            a.score != b.score
                ? a.score < b.score
                : (a.entry.timestamp_us != b.entry.timestamp_us
                       ? a.entry.timestamp_us < b.entry.timestamp_us
                       : a.entry.entry_id > b.entry.entry_id);
        if (a_weaker) weakest_sec = s;
      }
      return weakest_sec;
    };
    while (true) {
      serialized = canonical_payload(ctx);
      if (serialized.size() <= budget_bytes) break;
      auto* victim = weakest(&ctx.static_section, &ctx.low_freq_section,
                             &ctx.high_freq_section);
      if (!victim) {
        throw std::runtime_error(
            "fuse: budget too small for the empty envelope (" +
            std::to_string(serialized.size()) + " > " +
            std::to_string(budget_bytes) + " bytes)");
      }
      victim->pop_back();
    }
  }
  ctx.payload_bytes = serialized.size();
  return ctx;
}

FusedContext QueryEngine::retrieve(const QueryRequirement& r) const {
  const QueryVector q = encode(r);
  auto e_static = search(q, Partition::Static, r, cfg_.k_static);
  auto e_hf = search(q, Partition::HF, r, cfg_.k_hf);
  auto e_sf = search(q, Partition::SF, r, cfg_.k_sf);
  return fuse(std::move(e_static), std::move(e_hf), std::move(e_sf),
              cfg_.budget_bytes, r.t_now_us);
}

}  // namespace unipool
