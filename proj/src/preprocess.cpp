#include "covdet/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "covdet/bandpass.hpp"
#include "covdet/errors.hpp"
#include "covdet/rng.hpp"

namespace covdet {

void PreprocessConfig::validate(double fs) const {
    require(band_lo_hz > 0.0 && band_lo_hz < band_hi_hz && band_hi_hz < fs / 2.0, ErrorKind::usage,
            "preprocess: need 0 < band_lo < band_hi < fs/2");
    require(window_seconds > 0.0, ErrorKind::usage, "preprocess: window_seconds must be positive");
    require(jitter_sigma >= 0.0, ErrorKind::usage, "preprocess: jitter_sigma must be nonnegative");
}

namespace {

int choose_crop_start(const Waveform& w, int window, CropMode mode, Rng& rng) {
    const int max_start = w.n - window;
    if (max_start == 0) return 0;
    if (w.label == Label::event && w.onset_index) {
        const int onset = static_cast<int>(*w.onset_index);
        // starts that keep the onset inside the window
        const int lo = std::max(0, onset - window + 1);
        const int hi = std::min(max_start, onset);
        if (lo > hi) return mode == CropMode::random ? static_cast<int>(rng.below(static_cast<std::uint64_t>(max_start + 1)))
                                                     : max_start / 2;
        if (mode == CropMode::random) return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
        // deterministic: maximize the distance from the onset to both edges
        return std::clamp(onset - window / 2, lo, hi);
    }
    if (mode == CropMode::random) return static_cast<int>(rng.below(static_cast<std::uint64_t>(max_start + 1)));
    return max_start / 2;
}

} // namespace

Waveform preprocess(const Waveform& w, const PreprocessConfig& cfg, std::uint64_t rng_seed) {
    cfg.validate(w.sample_rate_hz);
    const int window = cfg.window_samples(w.sample_rate_hz);
    require(w.n >= window, ErrorKind::data,
            "preprocess: record '" + w.id + "' has " + std::to_string(w.n) + " samples, window needs " +
                std::to_string(window));

    Rng rng(substream(rng_seed, "preprocess"));
    const int start = choose_crop_start(w, window, cfg.crop, rng);

    Waveform out(w.id, window);
    out.label = w.label;
    out.sample_rate_hz = w.sample_rate_hz;
    if (w.onset_index) {
        const std::int64_t shifted = *w.onset_index - start;
        if (shifted >= 0 && shifted < window) out.onset_index = shifted;
    }
    for (int c = 0; c < kChannels; ++c)
        std::copy(w.channel(c) + start, w.channel(c) + start + window, out.channel(c));

    bandpass_3c(out.samples.data(), window, out.sample_rate_hz, cfg.band_lo_hz, cfg.band_hi_hz);

    for (int c = 0; c < kChannels; ++c) {
        float* row = out.channel(c);
        double mean = 0.0;
        for (int t = 0; t < window; ++t) mean += row[t];
        mean /= window;
        double var = 0.0;
        for (int t = 0; t < window; ++t) {
            row[t] = static_cast<float>(row[t] - mean);
            var += static_cast<double>(row[t]) * row[t];
        }
        const double sd = std::sqrt(var / window);
        if (cfg.normalize) {
            if (sd < 1e-12) {
                std::fill(row, row + window, 0.f); // flat (gap-like) channel
            } else {
                const float inv = static_cast<float>(1.0 / sd);
                for (int t = 0; t < window; ++t) row[t] *= inv;
            }
        }
    }

    if (cfg.jitter_sigma > 0.0) {
        for (int c = 0; c < kChannels; ++c) {
            float* row = out.channel(c);
            for (int t = 0; t < window; ++t) row[t] += static_cast<float>(rng.normal(0.0, cfg.jitter_sigma));
        }
    }
    return out;
}

std::vector<Waveform> onset_margin_filter(const std::vector<Waveform>& records, double margin_seconds) {
    std::vector<Waveform> kept;
    kept.reserve(records.size());
    for (const auto& w : records) {
        if (w.label == Label::event) {
            if (!w.onset_index) continue; // margin unknown
            const double margin = margin_seconds * w.sample_rate_hz;
            const double onset = static_cast<double>(*w.onset_index);
            if (onset < margin || onset > w.n - margin) continue;
        }
        kept.push_back(w);
    }
    return kept;
}

} // namespace covdet
