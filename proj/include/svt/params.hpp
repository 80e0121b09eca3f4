#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "svt/matrix.hpp"

namespace svt {

// All trainable state lives in one name->tensor table; names are stable and
// the map order (lexicographic) defines serialization and checksum order.
using ParamTable = std::map<std::string, Matrix>;

std::size_t count_parameters(const ParamTable& params);
double parameter_megabytes(std::size_t count);  // float32 storage size

struct TensorShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
};
std::vector<TensorShape> shape_table(const ParamTable& params);
std::string shape_table_tsv(const ParamTable& params);

// Order-sensitive digest of the raw tensor bytes; used to prove the backbone
// stayed frozen through incremental inference.
std::uint64_t param_checksum(const ParamTable& params);

struct Checkpoint {
  ParamTable tensors;  // may include "opt.velocity.*" entries for resume
  nlohmann::json config_echo = nlohmann::json::object();
  std::uint64_t seed = 0;
  int epoch = -1;  // last completed training epoch, -1 if not training state
};

// Envelope: u64-LE header length, JSON header (version, dtype, seed, epoch,
// config echo, tensor names+shapes), then float32-LE payloads in header
// order.
void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace svt
