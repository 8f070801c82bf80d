#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace covdet {

inline constexpr int kChannels = 3;
inline constexpr double kSampleRateHz = 100.0;
inline constexpr int kWindowSamples = 3000;

enum class Label : std::uint8_t { noise = 0, event = 1, unlabeled = 255 };

std::string label_name(Label l);

// A 3-component waveform window with optional label/onset metadata.
struct Waveform {
    std::string id;
    Label label = Label::unlabeled;
    std::optional<std::int64_t> onset_index;
    double sample_rate_hz = kSampleRateHz;
    int n = 0;
    std::vector<float> samples; // (3, n), channel-major

    Waveform() = default;
    Waveform(std::string id_, int n_) : id(std::move(id_)), n(n_), samples(static_cast<std::size_t>(kChannels) * n_, 0.f) {}

    float* channel(int c) { return samples.data() + static_cast<std::size_t>(c) * n; }
    const float* channel(int c) const { return samples.data() + static_cast<std::size_t>(c) * n; }
};

// Validation failure for one record; loading continues past these.
struct RecordError {
    std::string id;
    std::string message;
};

struct ManifestEntry {
    std::filesystem::path file;
    std::string id;
    Label label = Label::unlabeled;
    std::optional<std::int64_t> onset_index;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::size_t n_event = 0, n_noise = 0, n_unlabeled = 0;
};

struct LoadResult {
    std::vector<Waveform> records;
    DatasetManifest manifest;
    std::vector<RecordError> errors;
};

// Binary container: magic "RCVR", version u32, record count u64, then per
// record: id (u32 length + bytes), label u8, onset i64 (-1 if absent),
// sample_rate f64, N u32, 3*N float32 channel-major.
void write_container(const std::filesystem::path& path, const std::vector<Waveform>& records);

// Reads a container or a CSV file (header id,label,onset,ch,t0,...; three
// rows per record). Malformed records are reported and skipped.
void read_waveform_file(const std::filesystem::path& path, std::vector<Waveform>& out, std::vector<RecordError>& errors);

// Plain-text manifest: one file path per line, '#' comments, paths relative
// to the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& files);

// Loads every record referenced by the manifest, validating shapes and
// finiteness; per-record failures are collected, not fatal.
LoadResult load_dataset(const std::filesystem::path& manifest_path);

} // namespace covdet
