#pragma once
// Synthetic UAVCAN-like traffic: periodic benign publishers plus flooding,
// fuzzy and replay injections laid out like the ten reference scenarios.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canids/log_io.hpp"

namespace canids {

enum class AttackKind { flooding, fuzzy, replay };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

struct TimeRange {
  double begin = 0.0;  // inclusive
  double end = 0.0;    // exclusive
};

struct AttackEpisode {
  AttackKind kind = AttackKind::flooding;
  double start = 0.0;
  double duration = 0.0;
  double interval = 0.005;
  // Replay only: source of captured frames and an optional identifier filter.
  TimeRange capture;
  std::optional<std::uint32_t> capture_id;

  double end() const { return start + duration; }
};

struct BenignPublisher {
  std::uint32_t can_id = 0;
  double period = 0.01;  // seconds
  double jitter = 0.0;   // fraction of period, uniform in [0, jitter * period)
  std::uint8_t dlc = 8;
  std::uint8_t frames_per_transfer = 1;
  double phase = 0.0;    // offset of the first transfer, seconds
};

struct BenignProfile {
  std::vector<BenignPublisher> publishers;
};

struct ScenarioSpec {
  int index = 0;
  double horizon = 60.0;
  std::uint64_t seed = 0;
  std::uint32_t command_id = 0;  // flooding / replay target
  BenignProfile benign;
  std::vector<AttackEpisode> episodes;
};

inline constexpr int kScenarioCount = 10;

/// RawCommand from the autopilot (priority 5, type 1030, node 1).
inline constexpr std::uint32_t kDefaultCommandId = 0x05040601;
inline constexpr double kDefaultHorizon = 60.0;

/// Six publishers, periods 5-50 ms: motor commands, ESC status (two-frame
/// transfers), node status and an auxiliary stream.
BenignProfile default_benign_profile();

/// Number of frames an episode injects: one at the start, then one per full
/// interval; never zero for a non-empty episode.
std::size_t injection_count(const AttackEpisode& episode);

CanLog generate_benign(const BenignProfile& profile, double horizon, std::uint64_t seed);
CanLog inject_flooding(CanLog log, const AttackEpisode& episode, std::uint32_t command_id = kDefaultCommandId);
CanLog inject_fuzzy(CanLog log, const AttackEpisode& episode, std::uint64_t seed);
CanLog inject_replay(CanLog log, const AttackEpisode& episode);

/// Builds the reference layout for scenario 1..10 (attack kinds, counts and
/// injection intervals of the scenario table).
ScenarioSpec table_scenario(int index, std::uint64_t seed, double horizon = kDefaultHorizon);

CanLog build_scenario(const ScenarioSpec& spec);

/// key=value text with [scenario], [publisher] and [episode] sections.
ScenarioSpec parse_scenario_config(std::istream& in);
ScenarioSpec load_scenario_config(const std::filesystem::path& path);
void write_scenario_config(const ScenarioSpec& spec, std::ostream& out);

}  // namespace canids
