#include "covdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "covdet/errors.hpp"

namespace covdet {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'C', 'V', 'W'};

void write_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

bool read_u32(std::ifstream& in, std::uint32_t& v) {
    in.read(reinterpret_cast<char*>(&v), 4);
    return in.gcount() == 4;
}

} // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<TensorRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise_runtime("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kCheckpointVersion);
    for (const auto& rec : records) {
        write_u32(out, static_cast<std::uint32_t>(rec.name.size()));
        out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
        write_u32(out, static_cast<std::uint32_t>(rec.dims.size()));
        for (auto d : rec.dims) write_u32(out, d);
        if (rec.data.size() != rec.count())
            raise_runtime("checkpoint record '" + rec.name + "': payload size does not match dims");
        out.write(reinterpret_cast<const char*>(rec.data.data()),
                  static_cast<std::streamsize>(rec.data.size() * sizeof(float)));
    }
    if (!out) raise_runtime("checkpoint write failed: " + path.string());
}

std::vector<TensorRecord> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise_data("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        raise_data("not a checkpoint file (bad magic): " + path.string());
    std::uint32_t version = 0;
    if (!read_u32(in, version)) raise_data("truncated checkpoint header: " + path.string());
    if (version != kCheckpointVersion)
        raise_data("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());

    std::vector<TensorRecord> records;
    for (;;) {
        std::uint32_t name_len = 0;
        if (!read_u32(in, name_len)) break; // clean EOF
        TensorRecord rec;
        rec.name.resize(name_len);
        in.read(rec.name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len))
            raise_data("truncated checkpoint record name in " + path.string());
        std::uint32_t rank = 0;
        if (!read_u32(in, rank)) raise_data("truncated checkpoint record '" + rec.name + "' in " + path.string());
        rec.dims.resize(rank);
        for (std::uint32_t i = 0; i < rank; ++i) {
            if (!read_u32(in, rec.dims[i]))
                raise_data("truncated checkpoint dims for '" + rec.name + "' in " + path.string());
        }
        rec.data.resize(rec.count());
        in.read(reinterpret_cast<char*>(rec.data.data()), static_cast<std::streamsize>(rec.data.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(rec.data.size() * sizeof(float)))
            raise_data("truncated checkpoint payload for '" + rec.name + "' in " + path.string());
        records.push_back(std::move(rec));
    }
    return records;
}

const TensorRecord* find_record(const std::vector<TensorRecord>& records, const std::string& name) {
    for (const auto& rec : records)
        if (rec.name == name) return &rec;
    return nullptr;
}

} // namespace covdet
