#include "svt/params.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "svt/error.hpp"
#include "svt/fsutil.hpp"
#include "svt/rng.hpp"

namespace svt {

std::size_t count_parameters(const ParamTable& params) {
  std::size_t total = 0;
  for (const auto& [name, tensor] : params) total += tensor.size();
  return total;
}

double parameter_megabytes(std::size_t count) {
  return static_cast<double>(count) * 4.0 / (1024.0 * 1024.0);
}

std::vector<TensorShape> shape_table(const ParamTable& params) {
  std::vector<TensorShape> out;
  out.reserve(params.size());
  for (const auto& [name, tensor] : params)
    out.push_back({name, tensor.rows, tensor.cols});
  return out;
}

std::string shape_table_tsv(const ParamTable& params) {
  std::ostringstream out;
  out << "name\trows\tcols\tcount\n";
  for (const auto& [name, tensor] : params)
    out << name << "\t" << tensor.rows << "\t" << tensor.cols << "\t"
        << tensor.size() << "\n";
  return out.str();
}

std::uint64_t param_checksum(const ParamTable& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, tensor] : params) {
    h = fnv1a64(name, h);
    h = fnv1a64(tensor.data.data(), tensor.data.size() * sizeof(double), h);
  }
  return h;
}

namespace {

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f32_le(std::string& out, float f) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const std::string& s, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
  return v;
}

float read_f32_le(const std::string& s, std::size_t off) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i)
    bits = (bits << 8) |
           static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  nlohmann::json header;
  header["format_version"] = 1;
  header["dtype"] = "float32";
  header["seed"] = ckpt.seed;
  header["epoch"] = ckpt.epoch;
  header["config"] = ckpt.config_echo;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, tensor] : ckpt.tensors)
    header["tensors"].push_back(
        {{"name", name}, {"rows", tensor.rows}, {"cols", tensor.cols}});
  const std::string hj = header.dump();

  std::string blob;
  blob.reserve(8 + hj.size() + count_parameters(ckpt.tensors) * 4);
  append_u64_le(blob, hj.size());
  blob += hj;
  for (const auto& [name, tensor] : ckpt.tensors)
    for (double v : tensor.data) append_f32_le(blob, static_cast<float>(v));
  atomic_write_file(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 8)
    fail(ErrorKind::Validation, "checkpoint too short: " + path.string());
  const std::uint64_t hlen = read_u64_le(blob, 0);
  if (8 + hlen > blob.size())
    fail(ErrorKind::Validation, "checkpoint header overruns file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(8, hlen));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation,
         std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("format_version", 0) != 1)
    fail(ErrorKind::Validation, "unsupported checkpoint format version");
  if (header.value("dtype", "") != "float32")
    fail(ErrorKind::Validation, "unsupported checkpoint dtype");
  Checkpoint ckpt;
  ckpt.seed = header.value("seed", std::uint64_t{0});
  ckpt.epoch = header.value("epoch", -1);
  ckpt.config_echo = header.value("config", nlohmann::json::object());
  std::size_t off = 8 + hlen;
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    Matrix m(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>());
    if (off + m.size() * 4 > blob.size())
      fail(ErrorKind::Validation, "checkpoint payload truncated at " + name);
    for (std::size_t i = 0; i < m.size(); ++i, off += 4)
      m.data[i] = static_cast<double>(read_f32_le(blob, off));
    if (!is_finite(m))
      fail(ErrorKind::Numeric,
           "checkpoint tensor " + name + " has non-finite values");
    ckpt.tensors.emplace(name, std::move(m));
  }
  if (off != blob.size())
    fail(ErrorKind::Validation, "checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace svt
