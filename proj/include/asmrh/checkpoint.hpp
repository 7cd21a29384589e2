#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace asmrh {

// On disk: magic "ASRH", u32 version, u32 config-blob length, blob bytes,
// u64 FNV-1a hash of the blob, then one record per array:
// u32 name length, name bytes, u8 dtype tag (0 = f32, 1 = f64), u32 rank,
// u64 extents, raw little-endian values. Records run to end of file.
struct CheckpointRecord {
    std::string name;
    std::uint8_t dtype = 1;
    std::vector<std::uint64_t> extents;
    std::vector<char> bytes;  // raw little-endian payload

    std::size_t numel() const;
    std::vector<double> as_f64() const;
};

struct Checkpoint {
    std::uint32_t version = 1;
    std::string config_blob;  // canonical JSON, stored verbatim
    std::vector<CheckpointRecord> records;

    const CheckpointRecord* find(const std::string& name) const;
};

std::uint64_t fnv1a(const std::string& bytes);

void checkpoint_save(const std::filesystem::path& path, const Checkpoint& ckpt);

// FormatError on bad magic, unsupported version, hash mismatch, or any
// truncation; a failed load leaves no partial state behind.
Checkpoint checkpoint_load(const std::filesystem::path& path);

CheckpointRecord make_record_f64(const std::string& name,
                                 const std::vector<std::uint64_t>& extents,
                                 const double* values);

}  // namespace asmrh
