#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace covdet {

// One named tensor inside an "RCVW" checkpoint file.
struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t count() const {
        std::size_t total = 1;
        for (auto d : dims) total *= d;
        return total;
    }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian container: magic "RCVW", version u32, then per-tensor records
// (name length u32, name bytes, rank u32, dims u32..., float32 payload) until
// end of file. Round-trips bit-exactly.
void write_checkpoint(const std::filesystem::path& path, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_checkpoint(const std::filesystem::path& path);

const TensorRecord* find_record(const std::vector<TensorRecord>& records, const std::string& name);

} // namespace covdet
