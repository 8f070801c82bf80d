#include "covdet/trigger.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "covdet/parallel.hpp"
#include "covdet/projections.hpp"
#include "covdet/rng.hpp"

namespace covdet {

int TriggerConfig::max_lag_steps(double latent_rate_hz) const {
    return static_cast<int>(std::lround(max_lag_seconds * latent_rate_hz));
}

void TriggerConfig::validate(double latent_rate_hz) const {
    require(sigma0_seconds > 0.0, ErrorKind::usage, "trigger: sigma0_seconds must be positive");
    require(max_lag_seconds * latent_rate_hz >= 3.0 * sigma0_seconds * latent_rate_hz - 1e-9, ErrorKind::usage,
            "trigger: max_lag must cover at least 3 sigma0");
    require(max_lag_steps(latent_rate_hz) >= 1, ErrorKind::usage, "trigger: max_lag shorter than one latent step");
}

Method method_from_name(const std::string& name) {
    if (name == "single") return Method::single;
    if (name == "augmented") return Method::augmented;
    if (name == "ensemble") return Method::ensemble;
    raise_usage("unknown method '" + name + "' (expected single, augmented or ensemble)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::single: return "single";
        case Method::augmented: return "augmented";
        default: return "ensemble";
    }
}

namespace {

constexpr double kLatentEps = 1e-8;

struct ChannelStats {
    std::vector<double> mean, inv_std;
};

ChannelStats batch_channel_stats(const Tensor3<float>& latents) {
    require(latents.b > 0, ErrorKind::data, "latent_normalize: empty batch");
    ChannelStats st;
    st.mean.assign(static_cast<std::size_t>(latents.c), 0.0);
    st.inv_std.assign(static_cast<std::size_t>(latents.c), 0.0);
    const double count = static_cast<double>(latents.b) * latents.n;
    for (int ci = 0; ci < latents.c; ++ci) {
        double sum = 0.0, sum2 = 0.0;
        for (int bi = 0; bi < latents.b; ++bi) {
            const float* row = latents.row(bi, ci);
            for (int t = 0; t < latents.n; ++t) {
                sum += row[t];
                sum2 += static_cast<double>(row[t]) * row[t];
            }
        }
        const double mean = sum / count;
        const double var = std::max(0.0, sum2 / count - mean * mean);
        st.mean[static_cast<std::size_t>(ci)] = mean;
        st.inv_std[static_cast<std::size_t>(ci)] = 1.0 / std::sqrt(var + kLatentEps);
    }
    return st;
}

ChannelStats stats_from_moments(const LatentMoments& m, int channels) {
    require(static_cast<int>(m.mean.size()) == channels && static_cast<int>(m.var.size()) == channels, ErrorKind::data,
            "latent_normalize: running stats have wrong channel count");
    ChannelStats st;
    st.mean.assign(m.mean.begin(), m.mean.end());
    st.inv_std.resize(m.var.size());
    for (std::size_t i = 0; i < m.var.size(); ++i) st.inv_std[i] = 1.0 / std::sqrt(m.var[i] + kLatentEps);
    return st;
}

Tensor3<float> normalize_with(const Tensor3<float>& latents, const ChannelStats& st) {
    Tensor3<float> out(latents.b, latents.c, latents.n);
    for (int bi = 0; bi < latents.b; ++bi)
        for (int ci = 0; ci < latents.c; ++ci) {
            const float* src = latents.row(bi, ci);
            float* dst = out.row(bi, ci);
            const double mean = st.mean[static_cast<std::size_t>(ci)];
            const double inv = st.inv_std[static_cast<std::size_t>(ci)];
            for (int t = 0; t < latents.n; ++t) dst[t] = static_cast<float>((src[t] - mean) * inv);
        }
    return out;
}

ChannelStats resolve_stats(const Tensor3<float>& latents, StatsSource source, const LatentMoments* running) {
    if (source == StatsSource::running) {
        require(running != nullptr && !running->empty(), ErrorKind::usage,
                "latent_normalize: running stats requested but none supplied (train first)");
        return stats_from_moments(*running, latents.c);
    }
    return batch_channel_stats(latents);
}

// Encode a record list through the model in batches.
Tensor3<float> encode_records(const AutoencoderModel<float>& model, const std::vector<Waveform>& records) {
    require(!records.empty(), ErrorKind::data, "score: no records");
    const int c_lat = model.arch.latent_channels();
    const int n_lat = model.arch.latent_length();
    Tensor3<float> latents(static_cast<int>(records.size()), c_lat, n_lat);
    const int chunk = 256;
    for (std::size_t begin = 0; begin < records.size(); begin += chunk) {
        const std::size_t end = std::min(records.size(), begin + chunk);
        Tensor3<float> batch(static_cast<int>(end - begin), kChannels, kWindowSamples);
        for (std::size_t i = begin; i < end; ++i) {
            const Waveform& w = records[i];
            require(w.n == kWindowSamples, ErrorKind::data,
                    "score: record '" + w.id + "' is not a preprocessed " + std::to_string(kWindowSamples) +
                        "-sample window");
            std::copy(w.samples.begin(), w.samples.end(), batch.row(static_cast<int>(i - begin), 0));
        }
        Tensor3<float> z = model.encode(batch);
        std::copy(z.v.begin(), z.v.end(), latents.v.begin() + static_cast<std::ptrdiff_t>(begin) * c_lat * n_lat);
    }
    return latents;
}

std::vector<double> score_profiles_per_record(const Tensor3<float>& normalized, int copies_per_record,
                                              bool include_self, const TriggerConfig& trig, double rate,
                                              std::vector<CovarianceProfile>* out_profiles) {
    const int n_records = normalized.b / copies_per_record;
    const int max_lag = trig.max_lag_steps(rate);
    std::vector<double> scores(static_cast<std::size_t>(n_records), 0.0);
    if (out_profiles) out_profiles->assign(static_cast<std::size_t>(n_records), {});
    parallel_ranges(static_cast<std::size_t>(n_records), 64, [&](int, std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            std::vector<ChannelsView> views;
            views.reserve(static_cast<std::size_t>(copies_per_record));
            for (int j = 0; j < copies_per_record; ++j)
                views.push_back(ChannelsView::of(normalized, static_cast<int>(r) * copies_per_record + j));
            CovarianceProfile profile = copies_per_record == 1
                                            ? cross_covariance(views[0], views[0], max_lag, rate)
                                            : pairwise_mean_profile(views, include_self, max_lag, rate);
            scores[r] = gaussian_score(profile, trig);
            if (out_profiles) (*out_profiles)[r] = std::move(profile);
        }
    });
    return scores;
}

} // namespace

Tensor3<float> latent_normalize(const Tensor3<float>& latents, StatsSource source, const LatentMoments* running) {
    return normalize_with(latents, resolve_stats(latents, source, running));
}

CovarianceProfile cross_covariance(ChannelsView a, ChannelsView b, int max_lag, double latent_rate_hz) {
    require(a.c == b.c && a.n == b.n, ErrorKind::data, "cross_covariance: shape mismatch");
    require(a.c > 0 && a.n > 0, ErrorKind::data, "cross_covariance: empty input");
    require(max_lag < a.n, ErrorKind::data,
            "cross_covariance: max_lag " + std::to_string(max_lag) + " must be below the sequence length " +
                std::to_string(a.n));

    CovarianceProfile p;
    p.max_lag = max_lag;
    p.latent_rate_hz = latent_rate_hz;
    p.values.assign(static_cast<std::size_t>(2 * max_lag + 1), 0.0);

    const int n = a.n;
    std::vector<double> ac(static_cast<std::size_t>(n)), bc(static_cast<std::size_t>(n));
    for (int ci = 0; ci < a.c; ++ci) {
        const float* ar = a.row(ci);
        const float* br = b.row(ci);
        double ma = 0.0, mb = 0.0;
        for (int t = 0; t < n; ++t) {
            ma += ar[t];
            mb += br[t];
        }
        ma /= n;
        mb /= n;
        for (int t = 0; t < n; ++t) {
            ac[static_cast<std::size_t>(t)] = ar[t] - ma;
            bc[static_cast<std::size_t>(t)] = br[t] - mb;
        }
        for (int lag = -max_lag; lag <= max_lag; ++lag) {
            const int t0 = std::max(0, -lag);
            const int t1 = std::min(n, n - lag);
            double acc = 0.0;
            for (int t = t0; t < t1; ++t) acc += ac[static_cast<std::size_t>(t)] * bc[static_cast<std::size_t>(t + lag)];
            p.values[static_cast<std::size_t>(lag + max_lag)] += acc / n;
        }
    }
    for (auto& v : p.values) v /= a.c;
    return p;
}

CovarianceProfile pairwise_mean_profile(const std::vector<ChannelsView>& latents, bool include_self, int max_lag,
                                        double latent_rate_hz) {
    require(!latents.empty(), ErrorKind::data, "pairwise_mean_profile: empty latent list");
    const int k = static_cast<int>(latents.size());
    CovarianceProfile mean;
    mean.max_lag = max_lag;
    mean.latent_rate_hz = latent_rate_hz;
    mean.values.assign(static_cast<std::size_t>(2 * max_lag + 1), 0.0);
    int pairs = 0;
    if (include_self) {
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const CovarianceProfile p = cross_covariance(latents[static_cast<std::size_t>(i)],
                                                             latents[static_cast<std::size_t>(j)], max_lag,
                                                             latent_rate_hz);
                for (std::size_t u = 0; u < p.values.size(); ++u) mean.values[u] += p.values[u];
                ++pairs;
            }
    } else {
        require(k >= 2, ErrorKind::data, "pairwise_mean_profile: need k >= 2 without self pairs");
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                const CovarianceProfile p = cross_covariance(latents[static_cast<std::size_t>(i)],
                                                             latents[static_cast<std::size_t>(j)], max_lag,
                                                             latent_rate_hz);
                for (std::size_t u = 0; u < p.values.size(); ++u) mean.values[u] += p.values[u];
                ++pairs;
            }
    }
    for (auto& v : mean.values) v /= pairs;
    return mean;
}

double gaussian_score(const CovarianceProfile& profile, const TriggerConfig& cfg) {
    require(profile.latent_rate_hz > 0.0, ErrorKind::data, "gaussian_score: profile has no latent rate");
    double num = 0.0, den = 0.0;
    for (int lag = -profile.max_lag; lag <= profile.max_lag; ++lag) {
        const double seconds = static_cast<double>(lag) / profile.latent_rate_hz;
        const double w = std::exp(-(seconds * seconds) / (2.0 * cfg.sigma0_seconds * cfg.sigma0_seconds));
        num += w * profile.at(lag);
        den += w;
    }
    return num / den;
}

namespace {

double catmull_rom(const float* y, int n, double u) {
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, n - 1);
    const double f = u - i;
    const double p0 = y[std::max(i - 1, 0)];
    const double p1 = y[i];
    const double p2 = y[std::min(i + 1, n - 1)];
    const double p3 = y[std::min(i + 2, n - 1)];
    return 0.5 * (2.0 * p1 + f * (-p0 + p2) + f * f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) +
                  f * f * f * (-p0 + 3.0 * p1 - 3.0 * p2 + p3));
}

double catmull_rom_d(const std::vector<double>& y, double u) {
    const int n = static_cast<int>(y.size());
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, n - 1);
    const double f = u - i;
    const double p0 = y[static_cast<std::size_t>(std::max(i - 1, 0))];
    const double p1 = y[static_cast<std::size_t>(i)];
    const double p2 = y[static_cast<std::size_t>(std::min(i + 1, n - 1))];
    const double p3 = y[static_cast<std::size_t>(std::min(i + 2, n - 1))];
    return 0.5 * (2.0 * p1 + f * (-p0 + p2) + f * f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) +
                  f * f * f * (-p0 + 3.0 * p1 - 3.0 * p2 + p3));
}

} // namespace

Waveform time_warp(const Waveform& w, double strength, int knots, std::uint64_t seed) {
    require(strength >= 0.0, ErrorKind::usage, "time_warp: strength must be nonnegative");
    const int n = w.n;
    if (n < 2) return w;
    const int m = std::max(2, knots);

    Rng rng(substream(seed, "time_warp"));
    std::vector<double> log_speed(static_cast<std::size_t>(m));
    for (auto& g : log_speed) g = strength * rng.normal();

    // interpolated positive speed, integrated into a strictly increasing map
    std::vector<double> speed(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        const double u = static_cast<double>(t) / (n - 1) * (m - 1);
        speed[static_cast<std::size_t>(t)] = std::exp(catmull_rom_d(log_speed, u));
    }
    std::vector<double> pos(static_cast<std::size_t>(n));
    pos[0] = 0.0;
    for (int t = 1; t < n; ++t)
        pos[static_cast<std::size_t>(t)] =
            pos[static_cast<std::size_t>(t - 1)] + 0.5 * (speed[static_cast<std::size_t>(t - 1)] + speed[static_cast<std::size_t>(t)]);
    const double scale = static_cast<double>(n - 1) / pos[static_cast<std::size_t>(n - 1)];
    for (auto& p : pos) p = std::min(p * scale, static_cast<double>(n - 1));

    Waveform out(w.id, n);
    out.label = w.label;
    out.sample_rate_hz = w.sample_rate_hz;
    for (int c = 0; c < kChannels; ++c) {
        const float* src = w.channel(c);
        float* dst = out.channel(c);
        for (int t = 0; t < n; ++t) dst[t] = static_cast<float>(catmull_rom(src, n, pos[static_cast<std::size_t>(t)]));
    }
    if (w.onset_index) {
        // the onset lands where the warp map crosses it
        const double target = static_cast<double>(*w.onset_index);
        const auto it = std::lower_bound(pos.begin(), pos.end(), target);
        std::int64_t mapped = it == pos.end() ? n - 1 : static_cast<std::int64_t>(it - pos.begin());
        if (mapped > 0 && target - pos[static_cast<std::size_t>(mapped - 1)] < pos[static_cast<std::size_t>(mapped)] - target)
            mapped -= 1;
        out.onset_index = mapped;
    }
    return out;
}

std::vector<double> score_records_single(const AutoencoderModel<float>& model, const std::vector<Waveform>& records,
                                         const TriggerConfig& trig, const ScoreOptions& opts) {
    const double rate = model.arch.latent_rate_hz();
    trig.validate(rate);
    Tensor3<float> latents = encode_records(model, records);
    Tensor3<float> normalized = latent_normalize(latents, opts.stats, opts.running);
    return score_profiles_per_record(normalized, 1, false, trig, rate, opts.out_profiles);
}

std::vector<double> score_records_augmented(const AutoencoderModel<float>& model, const std::vector<Waveform>& records,
                                            const MethodConfig& mcfg, const TriggerConfig& trig, std::uint64_t seed,
                                            const ScoreOptions& opts) {
    require(mcfg.k >= 1, ErrorKind::usage, "augmented: k must be >= 1");
    const double rate = model.arch.latent_rate_hz();
    trig.validate(rate);

    // copy 0 is the original record; copies 1..k-1 are warped
    std::vector<Waveform> copies;
    copies.reserve(records.size() * static_cast<std::size_t>(mcfg.k));
    for (const auto& w : records) {
        copies.push_back(w);
        for (int j = 1; j < mcfg.k; ++j)
            copies.push_back(time_warp(w, mcfg.warp_strength, mcfg.warp_knots,
                                       substream(seed, "augment", hash_str(w.id), static_cast<std::uint64_t>(j))));
    }
    Tensor3<float> latents = encode_records(model, copies);
    Tensor3<float> normalized = latent_normalize(latents, opts.stats, opts.running);
    return score_profiles_per_record(normalized, mcfg.k, mcfg.include_self, trig, rate, opts.out_profiles);
}

std::vector<double> score_records_ensemble(const std::vector<const AutoencoderModel<float>*>& models,
                                           const ProjectionSet& projections, const std::vector<Waveform>& records,
                                           const MethodConfig& mcfg, const TriggerConfig& trig,
                                           const ScoreOptions& opts) {
    require(models.size() >= 2 || (models.size() == 1 && mcfg.include_self), ErrorKind::usage,
            "ensemble: need at least 2 models (or include_self with one)");
    require(static_cast<int>(models.size()) == projections.k(), ErrorKind::usage,
            "ensemble: projection count does not match model count");
    const double rate = models[0]->arch.latent_rate_hz();
    trig.validate(rate);
    const int c_lat = models[0]->arch.latent_channels();
    const int n_lat = models[0]->arch.latent_length();
    for (const auto* m : models)
        require(m->arch.latent_channels() == c_lat && m->arch.latent_length() == n_lat, ErrorKind::usage,
                "ensemble: members must share the latent shape");

    const int k = static_cast<int>(models.size());
    const int n_records = static_cast<int>(records.size());
    // interleaved (record-major, member-minor) so per-record views are trivial
    Tensor3<float> normalized(n_records * k, c_lat, n_lat);
    for (int m = 0; m < k; ++m) {
        Tensor3<float> z = encode_records(*models[static_cast<std::size_t>(m)], records);
        Tensor3<float> projected = projections.apply(m, z);
        const LatentMoments* running = nullptr;
        if (opts.stats == StatsSource::running) {
            require(opts.running_per_member && static_cast<int>(opts.running_per_member->size()) == k,
                    ErrorKind::usage, "ensemble: running stats per member required");
            running = &(*opts.running_per_member)[static_cast<std::size_t>(m)];
        }
        Tensor3<float> norm = latent_normalize(projected, opts.stats, running);
        for (int r = 0; r < n_records; ++r)
            std::copy(norm.row(r, 0), norm.row(r, 0) + static_cast<std::size_t>(c_lat) * n_lat,
                      normalized.row(r * k + m, 0));
    }
    return score_profiles_per_record(normalized, k, mcfg.include_self, trig, rate, opts.out_profiles);
}

double score_single(const AutoencoderModel<float>& model, const Waveform& w, const TriggerConfig& trig,
                    const ScoreOptions& opts) {
    return score_records_single(model, {w}, trig, opts)[0];
}

double score_augmented(const AutoencoderModel<float>& model, const Waveform& w, const MethodConfig& mcfg,
                       const TriggerConfig& trig, std::uint64_t seed, const ScoreOptions& opts) {
    return score_records_augmented(model, {w}, mcfg, trig, seed, opts)[0];
}

double score_ensemble(const std::vector<const AutoencoderModel<float>*>& models, const ProjectionSet& projections,
                      const Waveform& w, const MethodConfig& mcfg, const TriggerConfig& trig,
                      const ScoreOptions& opts) {
    return score_records_ensemble(models, projections, {w}, mcfg, trig, opts)[0];
}

} // namespace covdet
