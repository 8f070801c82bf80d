#include "covdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "covdet/bandpass.hpp"
#include "covdet/errors.hpp"
#include "covdet/rng.hpp"

namespace covdet {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr int kFftSize = 4096; // >= kWindowSamples

double spectrum_amplitude(NoiseSpectrum kind, double f) {
    if (kind == NoiseSpectrum::white) return 1.0;
    return 1.0 / std::sqrt(std::max(f, 0.5)); // power ~ 1/f above the knee
}

// One channel of unit-std colored noise, 3000 samples.
std::vector<float> noise_channel(NoiseSpectrum kind, Rng& rng) {
    std::vector<std::complex<double>> spec(kFftSize, {0.0, 0.0});
    const double df = kSampleRateHz / kFftSize;
    for (int k = 1; k <= kFftSize / 2; ++k) {
        const double amp = spectrum_amplitude(kind, k * df);
        const std::complex<double> c(amp * rng.normal(), amp * rng.normal());
        spec[static_cast<std::size_t>(k)] = c;
        if (k < kFftSize / 2) spec[static_cast<std::size_t>(kFftSize - k)] = std::conj(c);
    }
    spec[static_cast<std::size_t>(kFftSize / 2)].imag(0.0);
    fft(spec, true);

    std::vector<float> out(kWindowSamples);
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < kWindowSamples; ++t) {
        const double v = spec[static_cast<std::size_t>(t)].real();
        out[static_cast<std::size_t>(t)] = static_cast<float>(v);
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / kWindowSamples;
    const double sd = std::sqrt(std::max(1e-30, sum2 / kWindowSamples - mean * mean));
    for (auto& v : out) v = static_cast<float>((v - mean) / sd);
    return out;
}

Waveform raw_noise(const SynthConfig& cfg, const std::string& id, std::uint64_t stream) {
    Waveform w(id, kWindowSamples);
    w.label = Label::noise;
    for (int c = 0; c < kChannels; ++c) {
        Rng rng(substream(stream, "ch", static_cast<std::uint64_t>(c)));
        auto ch = noise_channel(cfg.noise_spectrum, rng);
        std::copy(ch.begin(), ch.end(), w.channel(c));
    }
    return w;
}

double ricker(double t, double fc) {
    const double a = kPi * kPi * fc * fc * t * t;
    return (1.0 - 2.0 * a) * std::exp(-a);
}

struct Arrival {
    double t0_seconds;
    double fc;
    double coda_tau;
    double coda_amp;
    double gain[kChannels];
};

void add_arrival(std::vector<float>& sig, const Arrival& ar, Rng& rng) {
    const double fs = kSampleRateHz;
    const int onset = static_cast<int>(ar.t0_seconds * fs + 0.5);
    const int half = static_cast<int>(2.0 / ar.fc * fs);
    for (int c = 0; c < kChannels; ++c) {
        float* row = sig.data() + static_cast<std::size_t>(c) * kWindowSamples;
        for (int t = std::max(0, onset - half); t < std::min(kWindowSamples, onset + half + 1); ++t)
            row[t] += static_cast<float>(ar.gain[c] * ricker((t - onset) / fs, ar.fc));
    }
    // scattered coda: white noise under an exponential envelope
    const int coda_len = std::min(kWindowSamples - onset, static_cast<int>(5.0 * ar.coda_tau * fs));
    for (int c = 0; c < kChannels; ++c) {
        float* row = sig.data() + static_cast<std::size_t>(c) * kWindowSamples;
        for (int t = 0; t < coda_len; ++t) {
            const double env = ar.coda_amp * std::exp(-t / (ar.coda_tau * fs));
            row[onset + t] += static_cast<float>(ar.gain[c] * env * rng.normal());
        }
    }
}

double rms(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * x[i];
    return std::sqrt(acc / static_cast<double>(n));
}

} // namespace

void SynthConfig::validate() const {
    require(n_event >= 0 && n_noise >= 0, ErrorKind::usage, "synth: counts must be nonnegative");
    require(snr_lo > 0.0 && snr_lo <= snr_hi, ErrorKind::usage, "synth: need 0 < snr_lo <= snr_hi");
    require(onset_lo_seconds >= 0.0 && onset_lo_seconds <= onset_hi_seconds, ErrorKind::usage,
            "synth: invalid onset range");
    require(onset_hi_seconds < 30.0, ErrorKind::usage, "synth: onset range must lie inside the 30 s window");
    require(glitch_fraction >= 0.0 && glitch_fraction <= 1.0, ErrorKind::usage,
            "synth: glitch_fraction must be in [0,1]");
}

void fft(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    require((n & (n - 1)) == 0 && n > 0, ErrorKind::usage, "fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = x[i + j];
                const auto v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : x) v /= static_cast<double>(n);
}

Waveform generate_noise(const SynthConfig& cfg, int k) {
    cfg.validate();
    const std::uint64_t stream = substream(cfg.seed, "noise", static_cast<std::uint64_t>(k));
    char id[32];
    std::snprintf(id, sizeof(id), "noise_%06d", k);
    Waveform w = raw_noise(cfg, id, stream);

    Rng glitch_rng(substream(stream, "glitch"));
    if (glitch_rng.bernoulli(cfg.glitch_fraction)) {
        const int c = static_cast<int>(glitch_rng.below(kChannels));
        const int t = static_cast<int>(glitch_rng.below(kWindowSamples));
        const double sd = rms(w.channel(c), kWindowSamples);
        w.channel(c)[t] += static_cast<float>((glitch_rng.bernoulli(0.5) ? 10.0 : -10.0) * sd);
    }
    return w;
}

EventParts generate_event_parts(const SynthConfig& cfg, int k) {
    cfg.validate();
    const std::uint64_t stream = substream(cfg.seed, "event", static_cast<std::uint64_t>(k));
    char id[32];
    std::snprintf(id, sizeof(id), "event_%06d", k);
    Waveform noise = raw_noise(cfg, id, stream);

    Rng rng(substream(stream, "arrivals"));
    const double onset_sec = rng.uniform(cfg.onset_lo_seconds, cfg.onset_hi_seconds);
    const double target_snr = rng.uniform(cfg.snr_lo, cfg.snr_hi);

    Arrival first{};
    first.t0_seconds = onset_sec;
    first.fc = rng.uniform(2.0, 10.0);
    first.coda_tau = rng.uniform(0.5, 2.0);
    first.coda_amp = rng.uniform(0.3, 0.7);
    first.gain[0] = 1.0;
    first.gain[1] = rng.uniform(0.2, 0.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    first.gain[2] = rng.uniform(0.2, 0.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);

    Arrival second{};
    second.t0_seconds = onset_sec + rng.uniform(1.0, 5.0);
    second.fc = rng.uniform(2.0, 10.0);
    second.coda_tau = rng.uniform(0.5, 2.0);
    second.coda_amp = rng.uniform(0.3, 0.7);
    second.gain[0] = rng.uniform(0.3, 0.7) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    second.gain[1] = rng.uniform(0.8, 1.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    second.gain[2] = rng.uniform(0.8, 1.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);

    std::vector<float> signal(static_cast<std::size_t>(kChannels) * kWindowSamples, 0.f);
    add_arrival(signal, first, rng);
    add_arrival(signal, second, rng);

    // Calibrate post-bandpass SNR: signal RMS in [onset, onset+5 s) over the
    // full-record noise RMS, both measured over all channels.
    const int onset = static_cast<int>(onset_sec * kSampleRateHz + 0.5);
    const int win_end = std::min(kWindowSamples, onset + static_cast<int>(5.0 * kSampleRateHz));
    std::vector<float> sig_bp = signal;
    std::vector<float> noise_bp(noise.samples);
    bandpass_3c(sig_bp.data(), kWindowSamples, kSampleRateHz, 1.0, 20.0);
    bandpass_3c(noise_bp.data(), kWindowSamples, kSampleRateHz, 1.0, 20.0);
    double sig_acc = 0.0, noise_acc = 0.0;
    for (int c = 0; c < kChannels; ++c) {
        const float* sr = sig_bp.data() + static_cast<std::size_t>(c) * kWindowSamples;
        for (int t = onset; t < win_end; ++t) sig_acc += static_cast<double>(sr[t]) * sr[t];
        const float* nr = noise_bp.data() + static_cast<std::size_t>(c) * kWindowSamples;
        for (int t = 0; t < kWindowSamples; ++t) noise_acc += static_cast<double>(nr[t]) * nr[t];
    }
    const double sig_rms = std::sqrt(sig_acc / (kChannels * std::max(1, win_end - onset)));
    const double noise_rms = std::sqrt(noise_acc / (static_cast<double>(kChannels) * kWindowSamples));
    const double unit_snr = sig_rms / noise_rms;
    const double alpha = target_snr / std::max(1e-12, unit_snr);

    EventParts parts;
    parts.noise = noise.samples;
    parts.signal = signal;
    for (auto& v : parts.signal) v = static_cast<float>(v * alpha);
    parts.target_snr = target_snr;

    parts.mixed = std::move(noise);
    parts.mixed.label = Label::event;
    parts.mixed.onset_index = onset;
    for (std::size_t i = 0; i < parts.mixed.samples.size(); ++i) parts.mixed.samples[i] += parts.signal[i];
    return parts;
}

Waveform generate_event(const SynthConfig& cfg, int k) { return generate_event_parts(cfg, k).mixed; }

BuildResult build_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir, const std::string& stem) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    std::vector<Waveform> records;
    records.reserve(static_cast<std::size_t>(cfg.n_event) + cfg.n_noise);
    std::vector<double> snrs;
    for (int k = 0; k < cfg.n_event; ++k) {
        EventParts parts = generate_event_parts(cfg, k);
        snrs.push_back(parts.target_snr);
        records.push_back(std::move(parts.mixed));
    }
    for (int k = 0; k < cfg.n_noise; ++k) records.push_back(generate_noise(cfg, k));

    BuildResult res;
    res.container = out_dir / (stem + ".rcvr");
    res.manifest = out_dir / (stem + "_manifest.txt");
    res.report = out_dir / (stem + "_report.txt");
    res.n_event = static_cast<std::size_t>(cfg.n_event);
    res.n_noise = static_cast<std::size_t>(cfg.n_noise);

    write_container(res.container, records);
    write_manifest(res.manifest, {res.container.filename()});

    std::ofstream report(res.report, std::ios::trunc);
    report << "records: " << records.size() << "\n";
    report << "events: " << cfg.n_event << "\n";
    report << "noise: " << cfg.n_noise << "\n";
    report << "noise_spectrum: " << (cfg.noise_spectrum == NoiseSpectrum::white ? "white" : "brownish") << "\n";
    report << "glitch_fraction: " << cfg.glitch_fraction << "\n";
    report << "seed: " << cfg.seed << "\n";
    if (!snrs.empty()) {
        report << "snr_histogram:\n";
        const int bins = 10;
        for (int b = 0; b < bins; ++b) {
            const double lo = cfg.snr_lo + (cfg.snr_hi - cfg.snr_lo) * b / bins;
            const double hi = cfg.snr_lo + (cfg.snr_hi - cfg.snr_lo) * (b + 1) / bins;
            std::size_t count = 0;
            for (double s : snrs)
                if (s >= lo && (s < hi || (b == bins - 1 && s <= hi))) ++count;
            char line[96];
            std::snprintf(line, sizeof(line), "  [%5.2f, %5.2f): %zu\n", lo, hi, count);
            report << line;
        }
    }
    return res;
}

} // namespace covdet
