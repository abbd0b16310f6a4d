#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "unipool/query_engine.hpp"
#include "unipool/rng.hpp"
#include "search_oracle.hpp"

using namespace unipool;
using unipool::test::make_entry;

namespace {

QueryRequirement make_requirement(const std::string& intent,
                                  const std::string& perception,
                                  std::int64_t t_now = 10'000'000,
                                  double x = 0.0, double y = 0.0) {
  QueryRequirement r;
  r.ego_anchor = {"x1", x, y};
  r.intent = intent;
  r.perception_summary = perception;
  r.t_now_us = t_now;
  r.horizon_s = 4.5;
  return r;
}

}  // namespace

TEST_CASE("encode: determinism, unit norm, zero vector") {
  PoolStore store({.dir = {}, .in_memory = true});
  QueryEngine engine(store);

  auto r = make_requirement("turn left at next intersection",
                            "two cars ahead, light traffic");
  const QueryVector a = engine.encode(r);
  const QueryVector b = engine.encode(r);
  CHECK(a.values == b.values);  // bit-exact
  CHECK(std::abs(a.norm() - 1.0) < 1e-6);

  // tokens shorter than 2 vanish -> zero vector
  auto tiny = make_requirement("a b c", "");
  CHECK(engine.encode(tiny).norm() == 0.0);

  // different perception text changes the vector unless tokens coincide
  auto r2 = make_requirement("turn left at next intersection",
                             "three trucks behind");
  const QueryVector c = engine.encode(r2);
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * c.values[i];
  CHECK(dot < 1.0 - 1e-9);
}

TEST_CASE("encode: norms of random texts stay unit") {
  PoolStore store({.dir = {}, .in_memory = true});
  QueryEngine engine(store);
  Rng rng(808);
  const char* words[] = {"stop", "merge", "yield", "signal", "pedestrian",
                         "lane", "turn",  "speed", "wet",    "queue"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string intent;
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    for (int i = 0; i < n; ++i) {
      intent += words[rng.uniform_int(0, 9)];
      intent += " ";
    }
    auto r = make_requirement(intent, "context");
    CHECK(std::abs(engine.encode(r).norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("embed_entry: idempotent, cached, token overlap") {
  PoolStore store({.dir = {}, .in_memory = true});
  QueryEngine engine(store);

  auto e1 = make_entry(1, "x1", 1'000'000, Partition::HF, "signal_state", "red");
  auto e2 = make_entry(2, "x1", 2'000'000, Partition::HF, "signal_state", "red");
  const auto v1 = engine.embed_entry(e1);
  const auto v2 = engine.embed_entry(e2);
  CHECK(v1 == v2);  // identical content -> identical vectors
  CHECK(engine.embed_entry(e1) == v1);  // idempotent

  auto q = engine.encode(make_requirement("check signal state", "red light"));
  double dot = 0.0;
  for (std::size_t i = 0; i < q.values.size(); ++i) dot += q.values[i] * v1[i];
  CHECK(dot > 0.0);  // shared tokens share buckets
}

TEST_CASE("embed cosine matches a brute-force token-overlap oracle") {
  PoolStore store({.dir = {}, .in_memory = true});
  QueryEngine engine(store);
  const int dim = engine.config().dim;

  struct Pair {
    const char* a_key; const char* a_val;
    const char* b_key; const char* b_val;
  };
  const Pair pairs[] = {
      {"signal_state", "red", "signal_state", "red"},
      {"signal_state", "red", "signal_state", "green"},
      {"objects", "two cars waiting", "objects", "two trucks waiting"},
      {"weather", "heavy rain", "road_geometry", "roundabout"},
      {"density", "high", "density", "low"},
      {"alert", "collision ahead on ramp", "alert", "collision behind"},
      {"construction", "cones and barriers", "construction", "cones"},
      {"objects", "pedestrian crossing north", "objects", "pedestrian"},
      {"trajectory", "moving east fast", "trajectory", "moving west fast"},
      {"lane_markings", "double yellow", "lane_markings", "double yellow"},
  };
  int id = 1;
  for (const auto& p : pairs) {
    for (int variant = 0; variant < 2; ++variant) {
      auto ea = make_entry(id++, "x1", 1'000'000, Partition::HF, p.a_key,
                           variant ? std::string(p.a_val) + " now" : p.a_val);
      auto eb = make_entry(id++, "x1", 1'000'000, Partition::HF, p.b_key, p.b_val);
      const auto& va = engine.embed_entry(ea);
      const auto& vb = engine.embed_entry(eb);
      double dot = 0.0;
      for (int i = 0; i < dim; ++i) dot += va[i] * vb[i];
      const double expect =
          test_oracle::cosine(test_oracle::buckets(test_oracle::entry_texts(ea), dim),
                        test_oracle::buckets(test_oracle::entry_texts(eb), dim));
      CHECK(dot == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("search equals the exhaustive scoring oracle, ties included") {
  Rng rng(20'250'809);
  PoolStore fstore({.dir = {}, .in_memory = true});
  std::vector<KnowledgeEntry> all;
  const std::int64_t t_now = 100'000'000;
  std::uint64_t id = 1;
  for (int i = 0; i < 1000; ++i) {
    auto e = test_oracle::random_entry(rng, id++, t_now);
    // clone some entries to force exact score ties
    if (rng.chance(0.1) && !all.empty()) {
      e.fields = all.back().fields;
      e.reason = all.back().reason;
      e.prediction = all.back().prediction;
      if (rng.chance(0.5)) e.timestamp_us = all.back().timestamp_us;
      e.partition = all.back().partition;
    }
    fstore.insert(e);
    all.push_back(e);
  }

  QueryEngine engine(fstore);
  const char* intents[] = {"stop before the red signal", "merge into queue",
                           "watch for collision", "proceed in rain"};
  for (int trial = 0; trial < 30; ++trial) {
    auto r = make_requirement(intents[rng.uniform_int(0, 3)],
                              "objects and density check", t_now,
                              rng.uniform(-50, 50), rng.uniform(-50, 50));
    const Partition p = static_cast<Partition>(rng.uniform_int(0, 2));
    const int k = static_cast<int>(rng.uniform_int(1, 20));
    auto got = engine.search(engine.encode(r), p, r, k);
    auto expect = test_oracle::search(all, r, p, k, engine.config());
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].entry.entry_id == expect[i].first);
      CHECK(got[i].score == doctest::Approx(expect[i].second).epsilon(1e-12));
      CHECK(got[i].score >= 0.0);
      CHECK(got[i].score <= 1.0);
    }
  }
}

TEST_CASE("static entries never decay; newer twins outscore older twins") {
  PoolStore store({.dir = {}, .in_memory = true});
  const std::int64_t t_now = 1'000'000'000;
  // ancient static entry
  store.insert(make_entry(1, "x1", 1'000, Partition::Static, "map_feature",
                          "stop line and crosswalk"));
  // identical HF twins, one older
  store.insert(make_entry(2, "x1", t_now - 1'500'000, Partition::HF,
                          "signal_state", "red"));
  store.insert(make_entry(3, "x1", t_now - 100'000, Partition::HF,
                          "signal_state", "red"));

  QueryEngine engine(store);
  auto r = make_requirement("map stop line crosswalk signal", "red", t_now);
  auto q = engine.encode(r);

  auto statics = engine.search(q, Partition::Static, r, 5);
  REQUIRE(statics.size() == 1);
  // decay = 1 for static: score equals raw cosine
  auto e = statics[0].entry;
  const double cosine =
      test_oracle::cosine(test_oracle::buckets({r.intent, r.perception_summary}, 256),
                    test_oracle::buckets(test_oracle::entry_texts(e), 256));
  CHECK(statics[0].score == doctest::Approx(cosine).epsilon(1e-12));

  auto hf = engine.search(q, Partition::HF, r, 5);
  REQUIRE(hf.size() == 2);
  CHECK(hf[0].entry.entry_id == 3);  // newer first
  CHECK(hf[0].score > hf[1].score);
}

TEST_CASE("canonical payload: empty envelope golden") {
  FusedContext ctx;
  ctx.t_us = 1'000'000;
  const std::string s = canonical_payload(ctx);
  CHECK(s ==
        "{\"high_freq\":[],\"low_freq\":[],\"static\":[],\"t_us\":1000000,"
        "\"truncated\":false}");
  CHECK(s.size() == 75);
}

TEST_CASE("canonical number rendering") {
  CHECK(canonical_number(0.5) == "0.5");
  CHECK(canonical_number(1.0) == "1");
  CHECK(canonical_number(-0.0) == "0");
  CHECK(canonical_number(0.238406) == "0.238406");
  CHECK(canonical_number(123456.7) == "123457");
  CHECK(canonical_number(1e-7) == "1e-07");
  CHECK_THROWS(canonical_number(std::nan("")));
}

TEST_CASE("fuse: dedup keeps the higher-scoring copy in its section") {
  auto e = make_entry(42, "x1", 5'000'000, Partition::HF, "objects", "cars");
  std::vector<ScoredEntry> hf = {{e, 0.8}};
  std::vector<ScoredEntry> sf = {{e, 0.3}};
  FusedContext ctx = QueryEngine::fuse({}, hf, sf, 4096, 5'000'000);
  CHECK(ctx.high_freq_section.size() == 1);
  CHECK(ctx.low_freq_section.empty());
  CHECK(ctx.total_entries() == 1);

  // reversed: SF copy wins
  ctx = QueryEngine::fuse({}, {{e, 0.2}}, {{e, 0.9}}, 4096, 5'000'000);
  CHECK(ctx.low_freq_section.size() == 1);
  CHECK(ctx.high_freq_section.empty());
}

TEST_CASE("fuse: budget enforcement and monotone truncation") {
  Rng rng(606);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<ScoredEntry> statics, hf, sf;
    std::uint64_t id = 1;
    auto add = [&](std::vector<ScoredEntry>& sec, Partition p, int n) {
      for (int i = 0; i < n; ++i) {
        auto e = make_entry(id++, "x1", rng.uniform_int(1, 10'000'000), p,
                            "objects",
                            std::string("payload text ") +
                                std::to_string(rng.uniform_int(0, 999)));
        sec.push_back({e, rng.next_double()});
      }
    };
    add(statics, Partition::Static, static_cast<int>(rng.uniform_int(0, 5)));
    add(sf, Partition::SF, static_cast<int>(rng.uniform_int(0, 5)));
    add(hf, Partition::HF, static_cast<int>(rng.uniform_int(0, 9)));

    const std::size_t b1 = static_cast<std::size_t>(rng.uniform_int(90, 800));
    const std::size_t b2 = b1 + static_cast<std::size_t>(rng.uniform_int(1, 800));

    FusedContext c1 = QueryEngine::fuse(statics, hf, sf, b1, 1'000'000);
    FusedContext c2 = QueryEngine::fuse(statics, hf, sf, b2, 1'000'000);

    CHECK(c1.payload_bytes == canonical_payload(c1).size());
    CHECK(c1.payload_bytes <= b1);
    CHECK(c2.payload_bytes <= b2);

    auto ids_of = [](const FusedContext& c) {
      std::set<std::uint64_t> ids;
      for (const auto* sec :
           {&c.static_section, &c.low_freq_section, &c.high_freq_section}) {
        for (const auto& se : *sec) CHECK(ids.insert(se.entry.entry_id).second);
      }
      return ids;
    };
    const auto ids1 = ids_of(c1);
    const auto ids2 = ids_of(c2);
    // raising the budget never loses an entry the smaller budget kept
    for (std::uint64_t kept : ids1) CHECK(ids2.count(kept) == 1);
    const std::size_t total_in = statics.size() + hf.size() + sf.size();
    CHECK(c1.truncated == (ids1.size() < total_in));
  }
}

TEST_CASE("fuse: budget below the empty envelope errors") {
  CHECK_THROWS_AS(QueryEngine::fuse({}, {}, {}, 32, 1'000'000),
                  std::invalid_argument);
  // envelope with a huge t_us cannot fit 64 bytes... 75-byte envelope at 64
  CHECK_THROWS_AS(QueryEngine::fuse({}, {}, {}, 64, 1'000'000),
                  std::runtime_error);
}

TEST_CASE("retrieve: red-light entry reaches the payload; determinism") {
  PoolStore store({.dir = {}, .in_memory = true});
  const std::int64_t t_now = 50'000'000;
  store.insert(make_entry(1, "x1", t_now - 200'000, Partition::HF,
                          "signal_state", "red"));
  store.insert(make_entry(2, "x1", 1'000'000, Partition::Static,
                          "road_geometry", "four-way intersection"));

  QueryEngine engine(store);
  auto r = make_requirement("proceed through intersection",
                            "approaching signal, check state", t_now);
  FusedContext ctx = engine.retrieve(r);
  const std::string payload = canonical_payload(ctx);
  CHECK(payload.find("\"signal_state\":\"red\"") != std::string::npos);
  CHECK(ctx.payload_bytes == payload.size());

  // repeated identical calls against a frozen store: bit-identical bytes
  CHECK(canonical_payload(engine.retrieve(r)) == payload);

  // empty store -> empty envelope
  PoolStore empty({.dir = {}, .in_memory = true});
  QueryEngine engine2(empty);
  FusedContext none = engine2.retrieve(r);
  CHECK(none.total_entries() == 0);
  CHECK(none.payload_bytes ==
        canonical_payload(none).size());
}
