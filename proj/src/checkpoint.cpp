// SPDX-License-Identifier: Apache-2.0
#include "tpflow/nn/checkpoint.hpp"

#include "tpflow/io/json_codec.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace tpflow::nn {
namespace {

constexpr const char* kFormat = "tpflow-checkpoint";

template <class T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <class T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw std::runtime_error("checkpoint " + path.string() + " is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (checkpoint.params.size() != checkpoint.spec.param_count()) {
    throw std::runtime_error("checkpoint parameter count does not match its spec");
  }
  const nlohmann::json header = {
      {"format", kFormat},
      {"version", Checkpoint::kVersion},
      {"spec", io::to_json(checkpoint.spec)},
      {"seed", checkpoint.seed},
      {"label", checkpoint.label},
      {"param_count", checkpoint.params.size()},
  };
  const std::string text = header.dump();

  // Write beside the target and rename so readers never see a partial file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (Eigen::Index i = 0; i < checkpoint.params.size(); ++i) write_le<double>(out, checkpoint.params(i));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto header_len = read_le<std::uint64_t>(in, path);
  if (header_len > (1u << 20)) throw std::runtime_error("checkpoint " + path.string() + " has a corrupt header");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw std::runtime_error("checkpoint " + path.string() + " is truncated");
  }
  const auto header = nlohmann::json::parse(text);
  if (header.value("format", "") != kFormat || header.value("version", 0) != Checkpoint::kVersion) {
    throw std::runtime_error("checkpoint " + path.string() + " has an unsupported format");
  }

  Checkpoint checkpoint;
  checkpoint.spec = io::mlp_spec_from_json(header.at("spec"));
  checkpoint.seed = header.at("seed").get<std::uint64_t>();
  checkpoint.label = header.value("label", "");
  const auto count = header.at("param_count").get<Eigen::Index>();
  if (count != checkpoint.spec.param_count()) {
    throw std::runtime_error("checkpoint " + path.string() + " parameter count does not match its spec");
  }
  checkpoint.params.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) checkpoint.params(i) = read_le<double>(in, path);
  return checkpoint;
}

}  // namespace tpflow::nn
