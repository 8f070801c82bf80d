#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "covdet/waveform.hpp"

namespace covdet {

enum class NoiseSpectrum { white, brownish };

struct SynthConfig {
    int n_event = 1000;
    int n_noise = 1000;
    double snr_lo = 2.0, snr_hi = 10.0;
    double onset_lo_seconds = 4.0, onset_hi_seconds = 24.0;
    NoiseSpectrum noise_spectrum = NoiseSpectrum::brownish;
    double glitch_fraction = 0.02;
    std::uint64_t seed = 42;

    void validate() const;
};

// In-place radix-2 FFT (size must be a power of two); inverse includes 1/n.
void fft(std::vector<std::complex<double>>& x, bool inverse);

// Colored noise with unit per-channel standard deviation; records are
// reproducible from (cfg.seed, k) alone. With probability glitch_fraction one
// channel receives a single-sample spike of 10x its std, mimicking an
// instrumental glitch.
Waveform generate_noise(const SynthConfig& cfg, int k);

// Noise plus a two-arrival transient (Ricker wavelets with decaying codas,
// distinct channel amplitude patterns), scaled so the post-bandpass SNR
// (signal RMS in the 5 s after onset over noise RMS) hits a uniform draw from
// [snr_lo, snr_hi].
Waveform generate_event(const SynthConfig& cfg, int k);

// Exposed for tests: the event before/after mixing plus the calibrated target.
struct EventParts {
    Waveform mixed;
    std::vector<float> noise;  // (3, n) channel-major
    std::vector<float> signal; // scaled transient, same layout
    double target_snr = 0.0;
};
EventParts generate_event_parts(const SynthConfig& cfg, int k);

struct BuildResult {
    std::filesystem::path container;
    std::filesystem::path manifest;
    std::filesystem::path report;
    std::size_t n_event = 0, n_noise = 0;
};

// Writes container + manifest + generation report under out_dir; byte-identical
// for identical configs.
BuildResult build_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                          const std::string& stem = "data");

} // namespace covdet
