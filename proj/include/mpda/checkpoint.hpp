#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpda/networks.hpp"

namespace mpda {

// Checkpoint layout (all integers little-endian):
//
//   "MPDACKPT"                 8-byte magic
//   u32   version              kCheckpointVersion
//   str   phase                u32 length + bytes
//   u32   epoch
//   u64   seed
//   str   config digest
//   u8    domain head          0 = deep, 1 = shallow
//   u64 x4 Adam step counts    encoder, task1, task2, domain
//   u32   entry count
//   entry*: str name, u32 ndim, u64 dims[ndim], u64 byte offset
//   u64   payload length in bytes
//   payload: float32 values, each entry's block at its offset

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class CheckpointVersionError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
class CheckpointManifestError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

struct CheckpointMeta {
    std::string phase;
    std::uint32_t epoch = 0;
    std::uint64_t seed = 0;
    std::string config_digest;
};

struct ManifestEntry {
    std::string name;
    Shape shape;
    std::uint64_t offset = 0;

    std::uint64_t byte_size() const { return shape_numel(shape) * 4; }
};

struct LoadedCheckpoint {
    ModelSet models;
    CheckpointMeta meta;
    DomainHead head = DomainHead::deep;
    std::vector<ManifestEntry> manifest;
};

std::string encode_checkpoint(const ModelSet& models, const CheckpointMeta& meta, DomainHead head);
LoadedCheckpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelSet& models, const CheckpointMeta& meta, DomainHead head,
                     const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// True for manifest names of trainable tensors (not running stats or moments).
bool is_trainable_entry(const std::string& name);

}  // namespace mpda
