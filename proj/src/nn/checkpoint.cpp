#include "rul/nn/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>

#include "rul/io.hpp"

namespace rul::nn {
namespace {

constexpr char kMagic[8] = {'R', 'U', 'L', 'C', 'K', 'P', 'T', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes little-endian");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["config_hash"] = ckpt.config_hash;
  manifest["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : ckpt.arrays) {
    manifest["arrays"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  const std::string header = manifest.dump();
  const std::uint64_t header_len = header.size();

  std::string bytes(kMagic, sizeof(kMagic));
  bytes.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  bytes += header;
  for (const auto& [name, t] : ckpt.arrays) {
    bytes.append(reinterpret_cast<const char*>(t.ptr()), t.size() * sizeof(double));
  }
  atomic_write(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + ": not a checkpoint archive");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, sizeof(header_len));
  if (16 + header_len > bytes.size()) throw std::runtime_error(path.string() + ": truncated manifest");
  const auto manifest = nlohmann::json::parse(bytes.substr(16, header_len));
  const std::size_t data_start = 16 + header_len;

  Checkpoint ckpt;
  ckpt.config_hash = manifest.at("config_hash").get<std::string>();
  for (const auto& entry : manifest.at("arrays")) {
    Shape shape = entry.at("shape").get<Shape>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = shape_size(shape);
    const std::size_t begin = data_start + offset * sizeof(double);
    if (begin + count * sizeof(double) > bytes.size()) {
      throw std::runtime_error(path.string() + ": truncated array data");
    }
    std::vector<double> data(count);
    std::memcpy(data.data(), bytes.data() + begin, count * sizeof(double));
    ckpt.arrays.emplace(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

Checkpoint snapshot(const ParameterSet& params, std::string config_hash) {
  Checkpoint ckpt;
  ckpt.config_hash = std::move(config_hash);
  for (const Parameter* p : params.all()) ckpt.arrays.emplace(p->name, p->value);
  return ckpt;
}

void restore(ParameterSet& params, const Checkpoint& ckpt) {
  for (Parameter* p : params.all()) {
    auto it = ckpt.arrays.find(p->name);
    if (it == ckpt.arrays.end()) throw std::runtime_error("checkpoint lacks parameter " + p->name);
    if (it->second.shape() != p->value.shape()) {
      throw std::runtime_error("checkpoint shape mismatch for " + p->name + ": " +
                               shape_str(it->second.shape()) + " vs " + shape_str(p->value.shape()));
    }
    p->value = it->second;
  }
}

}  // namespace rul::nn
