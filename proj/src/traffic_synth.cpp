#include "canids/traffic_synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "canids/error.hpp"
#include "canids/rng.hpp"

namespace canids {
namespace {

constexpr double kContinuationGap = 100e-6;  // spacing of frames inside one transfer

// Zero throttle on all channels, single frame, transfer id 0.
constexpr std::array<std::uint8_t, 8> kMotorHaltPayload{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xC0};

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void check_episode(const AttackEpisode& e) {
  if (!(e.interval > 0.0) || !std::isfinite(e.interval)) throw ConfigError("injection interval must be > 0");
  if (e.duration < 0.0 || e.start < 0.0) throw ConfigError("episode start and duration must be >= 0");
}

std::vector<double> injection_times(const AttackEpisode& e) {
  std::vector<double> out;
  const std::size_t n = injection_count(e);
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(quantize_timestamp(e.start + static_cast<double>(k) * e.interval));
  return out;
}

CanLog merge_injected(CanLog log, std::vector<RawFrame> injected) {
  log.frames.insert(log.frames.end(), std::make_move_iterator(injected.begin()),
                    std::make_move_iterator(injected.end()));
  // Stable: on equal timestamps existing frames precede injected ones.
  std::stable_sort(log.frames.begin(), log.frames.end(),
                   [](const RawFrame& a, const RawFrame& b) { return a.timestamp < b.timestamp; });
  return log;
}

std::vector<std::uint32_t> benign_ids(const CanLog& log) {
  std::set<std::uint32_t> ids;
  for (const auto& f : log.frames) {
    if (f.label == 0) ids.insert(f.can_id);
  }
  return {ids.begin(), ids.end()};
}

void append_tag(std::string& tags, AttackKind kind) {
  const std::string name(to_string(kind));
  if (tags.find(name) != std::string::npos) return;
  if (!tags.empty()) tags += ',';
  tags += name;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::flooding: return "flooding";
    case AttackKind::fuzzy: return "fuzzy";
    case AttackKind::replay: return "replay";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "flooding") return AttackKind::flooding;
  if (name == "fuzzy") return AttackKind::fuzzy;
  if (name == "replay") return AttackKind::replay;
  throw ConfigError("unknown attack kind '" + std::string(name) + "'");
}

BenignProfile default_benign_profile() {
  BenignProfile p;
  p.publishers = {
      {0x05040601, 0.005, 0.05, 8, 1, 0.0},     // ESC RawCommand
      {0x10040A14, 0.020, 0.10, 8, 2, 0.0011},  // ESC status, node 20
      {0x10040A15, 0.025, 0.10, 8, 2, 0.0023},  // ESC status, node 21
      {0x010E2001, 0.010, 0.10, 8, 1, 0.0037},
      {0x10015501, 0.050, 0.10, 8, 1, 0.0041},  // NodeStatus
      {0x0803E901, 0.040, 0.10, 6, 1, 0.0007},
  };
  return p;
}

std::size_t injection_count(const AttackEpisode& episode) {
  check_episode(episode);
  if (episode.duration <= 0.0) return 0;
  const auto full = static_cast<std::size_t>(std::floor(episode.duration / episode.interval + 1e-9));
  return std::max<std::size_t>(full, 1);
}

CanLog generate_benign(const BenignProfile& profile, double horizon, std::uint64_t seed) {
  if (profile.publishers.empty()) throw ConfigError("benign profile has no publishers");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");

  std::vector<RawFrame> frames;
  for (std::size_t p = 0; p < profile.publishers.size(); ++p) {
    const auto& pub = profile.publishers[p];
    if (!(pub.period > 0.0)) throw ConfigError("publisher period must be > 0");
    if (pub.jitter < 0.0 || pub.jitter >= 1.0) throw ConfigError("publisher jitter must be in [0, 1)");
    if (pub.can_id >= kCanIdLimit) throw ConfigError("publisher CAN ID exceeds 29 bits");
    if (pub.frames_per_transfer < 1 || pub.frames_per_transfer > 2) {
      throw ConfigError("frames_per_transfer must be 1 or 2");
    }
    const std::uint8_t min_dlc = pub.frames_per_transfer == 1 ? 1 : 4;
    if (pub.dlc < min_dlc || pub.dlc > kMaxDlc) throw ConfigError("publisher dlc out of range");

    std::mt19937_64 rng(detail::derive_seed(seed, p));
    for (std::size_t k = 0;; ++k) {
      const double nominal = pub.phase + static_cast<double>(k) * pub.period;
      if (nominal >= horizon - 1e-12) break;
      const double t0 = nominal + pub.jitter * pub.period * detail::unit_uniform(rng);
      const auto tid = static_cast<std::uint8_t>(k % 32);

      for (std::uint8_t part = 0; part < pub.frames_per_transfer; ++part) {
        RawFrame f;
        f.timestamp = quantize_timestamp(t0 + part * kContinuationGap);
        f.can_id = pub.can_id;
        f.dlc = pub.dlc;
        for (std::size_t i = 0; i + 1 < pub.dlc; ++i) f.data[i] = static_cast<std::uint8_t>(rng() & 0xFF);
        TailByte tail;
        tail.transfer_id = tid;
        tail.start_of_transfer = part == 0;
        tail.end_of_transfer = part + 1 == pub.frames_per_transfer;
        tail.toggle = (part % 2) == 1;
        f.data[pub.dlc - 1] = encode_tail_byte(tail);
        frames.push_back(f);
      }
    }
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const RawFrame& a, const RawFrame& b) { return a.timestamp < b.timestamp; });

  CanLog log;
  log.frames = std::move(frames);
  log.header.set("horizon", format_double(horizon));
  log.header.set("seed", std::to_string(seed));
  return log;
}

CanLog inject_flooding(CanLog log, const AttackEpisode& episode, std::uint32_t command_id) {
  std::vector<RawFrame> injected;
  for (double t : injection_times(episode)) {
    RawFrame f;
    f.label = 1;
    f.timestamp = t;
    f.can_id = command_id;
    f.set_payload(kMotorHaltPayload);
    injected.push_back(f);
  }
  return merge_injected(std::move(log), std::move(injected));
}

CanLog inject_fuzzy(CanLog log, const AttackEpisode& episode, std::uint64_t seed) {
  const auto times = injection_times(episode);
  if (times.empty()) return log;
  const auto ids = benign_ids(log);
  if (ids.empty()) throw ConfigError("fuzzy injection needs benign traffic to draw identifiers from");

  std::mt19937_64 rng(seed);
  std::vector<RawFrame> injected;
  injected.reserve(times.size());
  for (double t : times) {
    RawFrame f;
    f.label = 1;
    f.timestamp = t;
    f.can_id = ids[detail::uniform_index(rng, ids.size())];
    f.dlc = kMaxDlc;
    const std::uint64_t bits = rng();
    for (std::size_t i = 0; i < kMaxDlc; ++i) f.data[i] = static_cast<std::uint8_t>(bits >> (8 * i));
    injected.push_back(f);
  }
  return merge_injected(std::move(log), std::move(injected));
}

CanLog inject_replay(CanLog log, const AttackEpisode& episode) {
  const auto times = injection_times(episode);
  if (times.empty()) return log;
  if (episode.capture.end > episode.start + 1e-12) throw ConfigError("replay capture window must precede the episode");

  std::vector<RawFrame> captured;
  for (const auto& f : log.frames) {
    if (f.label != 0 || f.timestamp < episode.capture.begin || f.timestamp >= episode.capture.end) continue;
    if (episode.capture_id && f.can_id != *episode.capture_id) continue;
    captured.push_back(f);
  }
  if (captured.empty()) throw ConfigError("replay capture window contains no frames");

  std::vector<RawFrame> injected;
  injected.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    RawFrame f = captured[k % captured.size()];
    f.label = 1;
    f.timestamp = times[k];
    injected.push_back(std::move(f));
  }
  return merge_injected(std::move(log), std::move(injected));
}

ScenarioSpec table_scenario(int index, std::uint64_t seed, double horizon) {
  using K = AttackKind;
  std::vector<K> kinds;
  double interval = 0.005;
  switch (index) {
    case 1: kinds = {K::flooding, K::flooding, K::flooding}; interval = 0.0015; break;
    case 2: kinds = {K::flooding, K::flooding, K::flooding}; break;
    case 3: kinds = {K::fuzzy, K::fuzzy, K::fuzzy}; interval = 0.0015; break;
    case 4: kinds = {K::fuzzy, K::fuzzy, K::fuzzy}; break;
    case 5: kinds = {K::replay, K::replay, K::replay}; break;
    case 6: kinds = {K::replay, K::replay, K::replay, K::replay}; break;
    case 7: kinds = {K::flooding, K::fuzzy, K::flooding, K::fuzzy}; break;
    case 8: kinds = {K::fuzzy, K::replay, K::fuzzy, K::replay}; break;
    case 9: kinds = {K::flooding, K::replay, K::flooding, K::replay}; break;
    case 10: kinds = {K::flooding, K::fuzzy, K::replay}; break;
    default: throw ConfigError("scenario index must be in 1..10, got " + std::to_string(index));
  }
  if (!(horizon > 0.0)) throw ConfigError("horizon must be > 0");

  ScenarioSpec spec;
  spec.index = index;
  spec.horizon = horizon;
  spec.seed = seed;
  spec.command_id = kDefaultCommandId;
  spec.benign = default_benign_profile();

  // Episodes centred on equal slices of the horizon, each a tenth of it, so
  // the last one always falls in the final 30 % of the stream.
  const double n = static_cast<double>(kinds.size());
  const double duration = quantize_timestamp(0.1 * horizon);
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    AttackEpisode e;
    e.kind = kinds[i];
    e.interval = interval;
    e.duration = duration;
    const double centre = horizon * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n);
    e.start = quantize_timestamp(centre - duration / 2.0);
    if (e.kind == K::replay) {
      // Commands recorded just before the episode are sent again.
      e.capture = {std::max(0.0, quantize_timestamp(e.start - 0.1)), e.start};
      e.capture_id = spec.command_id;
    }
    spec.episodes.push_back(e);
  }
  return spec;
}

CanLog build_scenario(const ScenarioSpec& spec) {
  for (const auto& e : spec.episodes) {
    check_episode(e);
    if (e.end() > spec.horizon + 1e-9) throw ConfigError("episode extends past the horizon");
  }
  auto sorted = spec.episodes;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end() - 1e-12) throw ConfigError("attack episodes overlap");
  }

  CanLog log = generate_benign(spec.benign, spec.horizon, spec.seed);
  std::string tags;
  std::string intervals;
  for (std::size_t i = 0; i < spec.episodes.size(); ++i) {
    const auto& e = spec.episodes[i];
    switch (e.kind) {
      case AttackKind::flooding: log = inject_flooding(std::move(log), e, spec.command_id); break;
      case AttackKind::fuzzy: log = inject_fuzzy(std::move(log), e, detail::derive_seed(spec.seed, 1000 + i)); break;
      case AttackKind::replay: log = inject_replay(std::move(log), e); break;
    }
    append_tag(tags, e.kind);
    const auto iv = format_double(e.interval);
    if (intervals.find(iv) == std::string::npos) intervals += (intervals.empty() ? "" : ",") + iv;
  }

  LogHeader header;
  header.set("scenario", std::to_string(spec.index));
  header.set("attack_types", tags.empty() ? "none" : tags);
  header.set("injection_interval", intervals.empty() ? "none" : intervals);
  header.set("episodes", std::to_string(spec.episodes.size()));
  header.set("horizon", format_double(spec.horizon));
  header.set("seed", std::to_string(spec.seed));
  log.header = std::move(header);
  return log;
}

// ---------------------------------------------------------------------------
// Scenario config files

namespace {

std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("bad number for '" + key + "': " + v);
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v, int base = 10) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("bad integer for '" + key + "': " + v);
  }
  return out;
}

std::uint32_t to_can_id(const std::string& key, std::string v) {
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) v = v.substr(2);
  const auto id = to_uint(key, v, 16);
  if (id >= kCanIdLimit) throw ConfigError("CAN ID for '" + key + "' exceeds 29 bits");
  return static_cast<std::uint32_t>(id);
}

std::string hex_id(std::uint32_t id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%X", id);
  return buf;
}

}  // namespace

ScenarioSpec parse_scenario_config(std::istream& in) {
  ScenarioSpec spec;
  spec.command_id = kDefaultCommandId;
  bool custom_benign = false;
  enum class Section { scenario, publisher, episode } section = Section::scenario;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim_copy(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line == "[scenario]") {
        section = Section::scenario;
      } else if (line == "[publisher]") {
        section = Section::publisher;
        spec.benign.publishers.emplace_back();
        custom_benign = true;
      } else if (line == "[episode]") {
        section = Section::episode;
        spec.episodes.emplace_back();
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section " + line);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim_copy(std::string_view(line).substr(0, eq));
    const auto val = trim_copy(std::string_view(line).substr(eq + 1));

    switch (section) {
      case Section::scenario:
        if (key == "scenario") spec.index = static_cast<int>(to_uint(key, val));
        else if (key == "horizon") spec.horizon = to_double(key, val);
        else if (key == "seed") spec.seed = to_uint(key, val);
        else if (key == "command_id") spec.command_id = to_can_id(key, val);
        else throw ConfigError("line " + std::to_string(line_no) + ": unknown scenario key '" + key + "'");
        break;
      case Section::publisher: {
        auto& p = spec.benign.publishers.back();
        if (key == "can_id") p.can_id = to_can_id(key, val);
        else if (key == "period") p.period = to_double(key, val);
        else if (key == "jitter") p.jitter = to_double(key, val);
        else if (key == "dlc") p.dlc = static_cast<std::uint8_t>(std::min<std::uint64_t>(to_uint(key, val), 255));
        else if (key == "frames_per_transfer") p.frames_per_transfer = static_cast<std::uint8_t>(std::min<std::uint64_t>(to_uint(key, val), 255));
        else if (key == "phase") p.phase = to_double(key, val);
        else throw ConfigError("line " + std::to_string(line_no) + ": unknown publisher key '" + key + "'");
        break;
      }
      case Section::episode: {
        auto& e = spec.episodes.back();
        if (key == "kind") e.kind = parse_attack_kind(val);
        else if (key == "start") e.start = to_double(key, val);
        else if (key == "duration") e.duration = to_double(key, val);
        else if (key == "interval") e.interval = to_double(key, val);
        else if (key == "capture_begin") e.capture.begin = to_double(key, val);
        else if (key == "capture_end") e.capture.end = to_double(key, val);
        else if (key == "capture_id") e.capture_id = to_can_id(key, val);
        else throw ConfigError("line " + std::to_string(line_no) + ": unknown episode key '" + key + "'");
        break;
      }
    }
  }
  if (!custom_benign) spec.benign = default_benign_profile();
  return spec;
}

ScenarioSpec load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario config '" + path.string() + "'");
  return parse_scenario_config(in);
}

void write_scenario_config(const ScenarioSpec& spec, std::ostream& out) {
  out << "[scenario]\n"
      << "scenario=" << spec.index << '\n'
      << "horizon=" << format_double(spec.horizon) << '\n'
      << "seed=" << spec.seed << '\n'
      << "command_id=" << hex_id(spec.command_id) << '\n';
  for (const auto& p : spec.benign.publishers) {
    out << "\n[publisher]\n"
        << "can_id=" << hex_id(p.can_id) << '\n'
        << "period=" << format_double(p.period) << '\n'
        << "jitter=" << format_double(p.jitter) << '\n'
        << "dlc=" << static_cast<unsigned>(p.dlc) << '\n'
        << "frames_per_transfer=" << static_cast<unsigned>(p.frames_per_transfer) << '\n'
        << "phase=" << format_double(p.phase) << '\n';
  }
  for (const auto& e : spec.episodes) {
    out << "\n[episode]\n"
        << "kind=" << to_string(e.kind) << '\n'
        << "start=" << format_double(e.start) << '\n'
        << "duration=" << format_double(e.duration) << '\n'
        << "interval=" << format_double(e.interval) << '\n';
    if (e.kind == AttackKind::replay) {
      out << "capture_begin=" << format_double(e.capture.begin) << '\n'
          << "capture_end=" << format_double(e.capture.end) << '\n';
      if (e.capture_id) out << "capture_id=" << hex_id(*e.capture_id) << '\n';
    }
  }
}

}  // namespace canids
