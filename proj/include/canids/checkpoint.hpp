#pragma once
// Model checkpoints: a line-oriented text header describing the model
// followed by the parameter values as little-endian IEEE-754 doubles.
//
//   canids-checkpoint 1
//   kind sage
//   input_dim 2
//   hidden 16
//   ...
//   input_shift 0.12 0.2
//   input_scale 0.09 0.15
//   tensors 7
//   tensor sage0.w_self 2 16
//   ...
//   payload 1234
//   <1234 * 8 bytes>

#include <filesystem>
#include <iosfwd>
#include <string>

#include "canids/gnn.hpp"

namespace canids {

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(const ModelParams& params, std::ostream& out);
void write_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams read_checkpoint(std::istream& in);
ModelParams read_checkpoint(const std::filesystem::path& path);

std::string serialize_params(const ModelParams& params);
ModelParams deserialize_params(const std::string& bytes);

}  // namespace canids
