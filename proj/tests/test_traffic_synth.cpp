#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "canids/error.hpp"
#include "canids/traffic_synth.hpp"

using namespace canids;

namespace {

BenignProfile one_publisher(std::uint32_t id, double period) {
  BenignProfile p;
  p.publishers.push_back({id, period, 0.0, 8, 1, 0.0});
  return p;
}

std::string serialize(const CanLog& log) {
  std::ostringstream out;
  write_log(log, out);
  return out.str();
}

std::size_t attack_frames(const CanLog& log) {
  return static_cast<std::size_t>(std::count_if(log.frames.begin(), log.frames.end(), [](const RawFrame& f) {
    return f.label == 1;
  }));
}

bool sorted_by_time(const CanLog& log) {
  return std::is_sorted(log.frames.begin(), log.frames.end(),
                        [](const RawFrame& a, const RawFrame& b) { return a.timestamp < b.timestamp; });
}

AttackEpisode episode(AttackKind kind, double start, double duration, double interval) {
  AttackEpisode e;
  e.kind = kind;
  e.start = start;
  e.duration = duration;
  e.interval = interval;
  return e;
}

}  // namespace

TEST_CASE("single publisher schedule") {
  const auto log = generate_benign(one_publisher(0x100, 0.01), 1.0, 1);
  REQUIRE(log.frames.size() == 100);
  for (std::size_t k = 0; k < log.frames.size(); ++k) {
    CHECK(log.frames[k].timestamp == doctest::Approx(0.01 * static_cast<double>(k)).epsilon(1e-12));
    CHECK(log.frames[k].label == 0);
    CHECK(decode_tail_byte(log.frames[k].data[7]).transfer_id == k % 32);
  }
}

TEST_CASE("two publishers") {
  BenignProfile p = one_publisher(0x100, 0.01);
  p.publishers.push_back({0x200, 0.02, 0.0, 8, 1, 0.0});
  const auto log = generate_benign(p, 1.0, 1);
  CHECK(log.frames.size() == 150);
  CHECK(sorted_by_time(log));
}

TEST_CASE("benign generation is deterministic and seed dependent") {
  const auto p = default_benign_profile();
  CHECK(serialize(generate_benign(p, 2.0, 9)) == serialize(generate_benign(p, 2.0, 9)));
  CHECK(serialize(generate_benign(p, 2.0, 9)) != serialize(generate_benign(p, 2.0, 10)));
  CHECK_THROWS_AS(generate_benign(BenignProfile{}, 1.0, 1), ConfigError);
}

TEST_CASE("two-frame transfers share a transfer id and alternate toggles") {
  const auto log = generate_benign(default_benign_profile(), 1.0, 4);
  TransferTracker tracker;
  for (const auto& f : log.frames) {
    const auto m = decode_message(f, tracker);
    CHECK(m.warnings == CodecWarning::none);
  }
}

TEST_CASE("flooding counts") {
  const auto base = generate_benign(default_benign_profile(), 3.0, 2);
  const auto a = inject_flooding(base, episode(AttackKind::flooding, 1.0, 1.0, 0.0015));
  CHECK(attack_frames(a) == 666);
  const auto b = inject_flooding(base, episode(AttackKind::flooding, 1.0, 1.0, 0.005));
  CHECK(attack_frames(b) == 200);
  const auto c = inject_flooding(base, episode(AttackKind::flooding, 1.0, 0.0, 0.005));
  CHECK(c == base);
  CHECK(sorted_by_time(a));
  for (const auto& f : a.frames) {
    if (f.label == 1) CHECK(f.can_id == kDefaultCommandId);
  }
  CHECK_THROWS_AS(inject_flooding(base, episode(AttackKind::flooding, 1.0, 1.0, 0.0)), ConfigError);
}

TEST_CASE("fuzzy injections stay on benign identifiers with random payloads") {
  const auto base = generate_benign(default_benign_profile(), 3.0, 2);
  std::set<std::uint32_t> benign;
  for (const auto& f : base.frames) benign.insert(f.can_id);

  const auto e = episode(AttackKind::fuzzy, 1.0, 1.0, 0.005);
  const auto log = inject_fuzzy(base, e, 77);
  std::set<std::array<std::uint8_t, 8>> payloads;
  for (const auto& f : log.frames) {
    if (f.label != 1) continue;
    CHECK(benign.count(f.can_id) == 1);
    payloads.insert(f.data);
  }
  CHECK(attack_frames(log) == 200);
  CHECK(payloads.size() == 200);
  CHECK(log == inject_fuzzy(base, e, 77));
  CHECK_FALSE(log == inject_fuzzy(base, e, 78));
}

TEST_CASE("replay is cyclic over the capture") {
  CanLog base;
  for (int i = 0; i < 3; ++i) {
    RawFrame f;
    f.timestamp = 0.1 * i;
    f.can_id = 0x10 + static_cast<std::uint32_t>(i);
    std::vector<std::uint8_t> p{static_cast<std::uint8_t>(i), 0xC0};
    f.set_payload(p);
    base.frames.push_back(f);
  }
  auto e = episode(AttackKind::replay, 1.0, 0.045, 0.005);
  e.capture = {0.0, 0.5};
  const auto log = inject_replay(base, e);
  std::vector<RawFrame> injected;
  for (const auto& f : log.frames) {
    if (f.label == 1) injected.push_back(f);
  }
  REQUIRE(injected.size() == 9);
  for (std::size_t k = 0; k < injected.size(); ++k) {
    const auto& src = base.frames[k % 3];
    CHECK(injected[k].can_id == src.can_id);
    CHECK(injected[k].data == src.data);
    CHECK(injected[k].timestamp == doctest::Approx(1.0 + 0.005 * static_cast<double>(k)));
  }

  auto short_ep = episode(AttackKind::replay, 1.0, 0.002, 0.005);
  short_ep.capture = {0.0, 0.5};
  const auto one = inject_replay(base, short_ep);
  REQUIRE(attack_frames(one) == 1);
  for (const auto& f : one.frames) {
    if (f.label == 1) CHECK(f.timestamp == 1.0);
  }

  auto empty = e;
  empty.capture = {0.5, 0.9};
  CHECK_THROWS_AS(inject_replay(base, empty), ConfigError);
  auto after = e;
  after.capture = {0.0, 1.5};
  CHECK_THROWS_AS(inject_replay(base, after), ConfigError);
}

TEST_CASE("scenario layouts follow the table") {
  const int expected_counts[] = {3, 3, 3, 3, 3, 4, 4, 4, 4, 3};
  for (int i = 1; i <= kScenarioCount; ++i) {
    const auto spec = table_scenario(i, 1);
    CHECK(spec.episodes.size() == static_cast<std::size_t>(expected_counts[i - 1]));
    for (const auto& e : spec.episodes) {
      CHECK(e.interval == ((i == 1 || i == 3) ? 0.0015 : 0.005));
    }
  }
  auto kinds = [](int i) {
    std::multiset<AttackKind> k;
    for (const auto& e : table_scenario(i, 1).episodes) k.insert(e.kind);
    return k;
  };
  using K = AttackKind;
  CHECK(kinds(1) == std::multiset<K>{K::flooding, K::flooding, K::flooding});
  CHECK(kinds(7) == std::multiset<K>{K::flooding, K::flooding, K::fuzzy, K::fuzzy});
  CHECK(kinds(8) == std::multiset<K>{K::fuzzy, K::fuzzy, K::replay, K::replay});
  CHECK(kinds(9) == std::multiset<K>{K::flooding, K::flooding, K::replay, K::replay});
  CHECK(kinds(10) == std::multiset<K>{K::flooding, K::fuzzy, K::replay});
  CHECK_THROWS_AS(table_scenario(0, 1), ConfigError);
  CHECK_THROWS_AS(table_scenario(11, 1), ConfigError);
}

TEST_CASE("scenario label count equals the injection accounting") {
  for (int i = 1; i <= kScenarioCount; ++i) {
    const auto spec = table_scenario(i, 3, 20.0);
    const auto log = build_scenario(spec);
    std::size_t expected = 0;
    for (const auto& e : spec.episodes) expected += injection_count(e);
    CHECK(attack_frames(log) == expected);
    CHECK(sorted_by_time(log));
    CHECK(log.header.get("scenario") == std::to_string(i));
  }
}

TEST_CASE("scenario header metadata") {
  const auto log = build_scenario(table_scenario(10, 3, 20.0));
  const auto tags = log.header.get("attack_types");
  REQUIRE(tags);
  CHECK(tags->find("flooding") != std::string::npos);
  CHECK(tags->find("fuzzy") != std::string::npos);
  CHECK(tags->find("replay") != std::string::npos);
  CHECK(log.header.get("injection_interval") == "0.005");
}

TEST_CASE("overlapping episodes are rejected") {
  auto spec = table_scenario(1, 3, 20.0);
  spec.episodes[1].start = spec.episodes[0].start + 0.1;
  CHECK_THROWS_AS(build_scenario(spec), ConfigError);
}

TEST_CASE("scenario determinism") {
  const auto spec = table_scenario(8, 5, 10.0);
  CHECK(serialize(build_scenario(spec)) == serialize(build_scenario(spec)));
}

TEST_CASE("scenario config round trip") {
  auto spec = table_scenario(9, 12, 30.0);
  std::ostringstream out;
  write_scenario_config(spec, out);
  std::istringstream in(out.str());
  const auto back = parse_scenario_config(in);
  CHECK(serialize(build_scenario(back)) == serialize(build_scenario(spec)));

  std::istringstream bad("[scenario]\nhorizon=abc\n");
  CHECK_THROWS_AS(parse_scenario_config(bad), DataError);
}
