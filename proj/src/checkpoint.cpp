#include "canids/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace canids {
namespace {

constexpr const char* kMagic = "canids-checkpoint";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct HeaderReader {
  std::istream& in;
  std::size_t line_no = 0;

  std::vector<std::string> next(const char* expected_key, std::size_t fields) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(std::string("checkpoint truncated before '") + expected_key + "'");
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(t);
    if (tokens.empty() || tokens[0] != expected_key || tokens.size() != fields + 1) {
      throw DataError("checkpoint header line " + std::to_string(line_no) + ": expected '" + expected_key + "' with " +
                      std::to_string(fields) + " value(s)");
    }
    tokens.erase(tokens.begin());
    return tokens;
  }

  std::uint64_t integer(const char* key) { return to_u64(next(key, 1)[0], key); }
  double real(const char* key) { return to_double(next(key, 1)[0], key); }

  std::uint64_t to_u64(const std::string& s, const char* key) const {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw DataError(std::string("checkpoint: bad integer for '") + key + "'");
    }
    return v;
  }
  double to_double(const std::string& s, const char* key) const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw DataError(std::string("checkpoint: bad number for '") + key + "'");
    }
    return v;
  }
};

}  // namespace

void write_checkpoint(const ModelParams& params, std::ostream& out) {
  const auto& hp = params.hyper;
  out << kMagic << ' ' << kCheckpointVersion << '\n'
      << "kind " << to_string(params.kind) << '\n'
      << "input_dim " << params.input_dim << '\n'
      << "hidden " << hp.hidden << '\n'
      << "layers " << hp.layers << '\n'
      << "heads " << hp.heads << '\n'
      << "learning_rate " << fmt_double(hp.learning_rate) << '\n'
      << "epochs " << hp.epochs << '\n'
      << "seed " << hp.seed << '\n'
      << "leaky_slope " << fmt_double(hp.leaky_slope) << '\n'
      << "beta1 " << fmt_double(hp.beta1) << '\n'
      << "beta2 " << fmt_double(hp.beta2) << '\n'
      << "adam_eps " << fmt_double(hp.adam_eps) << '\n'
      << "standardize_inputs " << (hp.standardize_inputs ? 1 : 0) << '\n'
      << "class_weights " << fmt_double(params.class_weights[0]) << ' ' << fmt_double(params.class_weights[1])
      << '\n';
  out << "input_shift";
  for (double v : params.input_shift) out << ' ' << fmt_double(v);
  out << "\ninput_scale";
  for (double v : params.input_scale) out << ' ' << fmt_double(v);
  out << '\n'
      << "tensors " << params.tensors.size() << '\n';
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    out << "tensor " << params.names[i] << ' ' << params.tensors[i].rows() << ' ' << params.tensors[i].cols() << '\n';
    total += params.tensors[i].size();
  }
  out << "payload " << total << '\n';
  for (const auto& t : params.tensors) {
    for (double v : t.values()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (auto& b : bytes) {
        b = static_cast<char>(bits & 0xFF);
        bits >>= 8;
      }
      out.write(bytes, 8);
    }
  }
  if (!out) throw IoError("failed writing checkpoint");
}

void write_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(params, out);
}

ModelParams read_checkpoint(std::istream& in) {
  HeaderReader r{in};
  const auto magic = r.next(kMagic, 1);
  if (r.to_u64(magic[0], kMagic) != static_cast<std::uint64_t>(kCheckpointVersion)) {
    throw DataError("unsupported checkpoint version " + magic[0]);
  }
  ModelParams p;
  p.kind = parse_model_kind(r.next("kind", 1)[0]);
  p.input_dim = r.integer("input_dim");
  auto& hp = p.hyper;
  hp.hidden = r.integer("hidden");
  hp.layers = r.integer("layers");
  hp.heads = r.integer("heads");
  hp.learning_rate = r.real("learning_rate");
  hp.epochs = r.integer("epochs");
  hp.seed = r.integer("seed");
  hp.leaky_slope = r.real("leaky_slope");
  hp.beta1 = r.real("beta1");
  hp.beta2 = r.real("beta2");
  hp.adam_eps = r.real("adam_eps");
  const auto standardize = r.integer("standardize_inputs");
  if (standardize > 1) throw DataError("checkpoint: standardize_inputs must be 0 or 1");
  hp.standardize_inputs = standardize == 1;
  const auto w = r.next("class_weights", 2);
  p.class_weights = {r.to_double(w[0], "class_weights"), r.to_double(w[1], "class_weights")};
  for (const auto& v : r.next("input_shift", p.input_dim)) p.input_shift.push_back(r.to_double(v, "input_shift"));
  for (const auto& v : r.next("input_scale", p.input_dim)) p.input_scale.push_back(r.to_double(v, "input_scale"));
  for (double s : p.input_scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError("checkpoint: input_scale must be positive and finite");
  }

  const std::size_t count = r.integer("tensors");
  std::size_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto t = r.next("tensor", 3);
    p.names.push_back(t[0]);
    p.tensors.emplace_back(r.to_u64(t[1], "tensor"), r.to_u64(t[2], "tensor"));
    total += p.tensors.back().size();
  }
  if (r.integer("payload") != total) throw DataError("checkpoint payload size does not match tensor shapes");

  for (auto& t : p.tensors) {
    for (auto& v : t.values()) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw DataError("checkpoint payload truncated");
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[b];
      v = std::bit_cast<double>(bits);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after checkpoint payload");

  // Reject files whose tensor layout does not match what the model kind expects.
  const auto expected = init_params(p.kind, p.input_dim, p.hyper);
  if (expected.names != p.names) throw ShapeError("checkpoint tensors do not match a " + std::string(to_string(p.kind)));
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (!expected.tensors[i].same_shape(p.tensors[i])) throw ShapeError("checkpoint tensor '" + p.names[i] + "' has wrong shape");
  }
  return p;
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

std::string serialize_params(const ModelParams& params) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(params, out);
  return out.str();
}

ModelParams deserialize_params(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_checkpoint(in);
}

}  // namespace canids
