#pragma once

#include <map>
#include <string>

#include "mono/model.hpp"

namespace mono {

// Single-file model checkpoint: a text header (magic, format version, config
// as key=value lines) followed by named binary blocks, each "block <name>
// <ndim> <extents...>" plus row-major 64-bit little-endian reals. Semantic
// order matrices ride along as order<i>.A blocks; the right inverse is
// recomputed on load.
void save_checkpoint(const ModelGraph& model, const std::string& path);
ModelGraph load_checkpoint(const std::string& path);

// FNV-1a over the file bytes, hex encoded.
std::string checkpoint_hash_hex(const std::string& path);

std::map<std::string, std::string> model_config_to_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv);

}  // namespace mono
