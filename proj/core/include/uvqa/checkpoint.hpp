#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "uvqa/model.hpp"

namespace uvqa {

/// Binary checkpoint, all integers little-endian u64 unless noted:
///
///   magic "UVQACKPT" (8 bytes), schema version
///   ModelConfig fields in declaration order (13 values)
///   answer vocabulary words after the specials: count, then (length, bytes)...
///   question vocabulary words after <unk>: same layout
///   tensor count, then per tensor: name (length, bytes), rank, dims...,
///   raw IEEE-754 little-endian doubles
///
/// Tensors appear in parameter creation order. save -> load -> save is
/// byte-identical.
inline constexpr char kCheckpointMagic[8] = {'U', 'V', 'Q', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint64_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace uvqa
