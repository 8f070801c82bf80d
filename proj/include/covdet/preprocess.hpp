#pragma once

#include <cstdint>
#include <vector>

#include "covdet/waveform.hpp"

namespace covdet {

enum class CropMode {
    random,       // training: uniform window, onset kept inside for events
    deterministic // testing: onset maximally centered; plain center crop for noise
};

struct PreprocessConfig {
    double window_seconds = 30.0;
    double band_lo_hz = 1.0;
    double band_hi_hz = 20.0;
    double jitter_sigma = 1e-6;
    bool normalize = true; // per-channel std after demeaning
    CropMode crop = CropMode::random;

    int window_samples(double fs) const { return static_cast<int>(window_seconds * fs + 0.5); }
    void validate(double fs) const;
};

// Crop -> bandpass -> demean -> per-channel std normalization -> jitter.
// Deterministic given rng_seed; the onset index is remapped into the cropped
// frame (or dropped if it falls outside).
Waveform preprocess(const Waveform& w, const PreprocessConfig& cfg, std::uint64_t rng_seed);

// Drops event records whose onset lies within `margin_seconds` of either
// window edge (or is unknown); noise records pass unconditionally.
std::vector<Waveform> onset_margin_filter(const std::vector<Waveform>& records, double margin_seconds = 3.0);

} // namespace covdet
