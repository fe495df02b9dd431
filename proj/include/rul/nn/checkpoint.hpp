#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rul/nn/autograd.hpp"

namespace rul::nn {

/// Named arrays plus the hash of the config that produced them.
struct Checkpoint {
  std::string config_hash;
  std::map<std::string, Tensor> arrays;
};

/// Binary archive: 8-byte magic, u64 manifest length, JSON manifest
/// (config hash; name, shape and element offset per array), then the raw
/// little-endian doubles. Written atomically.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(const ParameterSet& params, std::string config_hash);
/// Copies arrays into `params`; every parameter must be present with a matching shape.
void restore(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace rul::nn
