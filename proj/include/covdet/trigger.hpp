#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covdet/model.hpp"
#include "covdet/tensor.hpp"
#include "covdet/waveform.hpp"

namespace covdet {

struct TriggerConfig {
    double sigma0_seconds = 2.5;
    double max_lag_seconds = 12.0;

    int max_lag_steps(double latent_rate_hz) const;
    void validate(double latent_rate_hz) const;
};

enum class Method { single, augmented, ensemble };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

struct MethodConfig {
    Method method = Method::single;
    int k = 5;                   // augmentations or ensemble members
    bool include_self = false;   // include i==i pairs in pairwise averaging
    double warp_strength = 0.2;  // time-warp augmentation scale
    int warp_knots = 4;
};

// Channel-averaged covariance as a function of lag, in latent steps.
struct CovarianceProfile {
    std::vector<double> values; // length 2*max_lag+1, index lag+max_lag
    int max_lag = 0;
    double latent_rate_hz = 0.0;

    double at(int lag) const { return values[static_cast<std::size_t>(lag + max_lag)]; }
};

// Lightweight (channels, time) view of one record inside a batch tensor.
struct ChannelsView {
    const float* data = nullptr;
    int c = 0, n = 0;

    static ChannelsView of(const Tensor3<float>& t, int bi) { return {t.row(bi, 0), t.c, t.n}; }
    const float* row(int ci) const { return data + static_cast<std::size_t>(ci) * n; }
};

enum class StatsSource { batch, running };

// Per-channel normalization over (batch, time), gamma=1 beta=0; running mode
// uses moments fitted at training time.
Tensor3<float> latent_normalize(const Tensor3<float>& latents, StatsSource source,
                                const LatentMoments* running = nullptr);

// Per channel: center both, cov(tau) = (1/N) sum_t a(t) b(t+tau) with zero
// contribution outside [0, N); averaged over channels. No amplitude
// normalization.
CovarianceProfile cross_covariance(ChannelsView a, ChannelsView b, int max_lag, double latent_rate_hz);

// Mean profile over unordered pairs i<j, or over all ordered pairs including
// i==i when include_self is set.
CovarianceProfile pairwise_mean_profile(const std::vector<ChannelsView>& latents, bool include_self, int max_lag,
                                        double latent_rate_hz);

// Gaussian-weighted average of the profile around lag zero; weights have
// width sigma0 in seconds and are normalized to sum 1.
double gaussian_score(const CovarianceProfile& profile, const TriggerConfig& cfg);

// Smooth monotone time reparameterization: `knots` control points carry
// multiplicative speed perturbations exp(strength * z); the log-speeds are
// cubic-interpolated, integrated, and the signal is resampled. Label and
// onset are carried through the warp map.
Waveform time_warp(const Waveform& w, double strength, int knots, std::uint64_t seed);

struct ProjectionSet; // projections.hpp

struct ScoreOptions {
    StatsSource stats = StatsSource::batch;
    const LatentMoments* running = nullptr; // per model, ensemble uses running_per_member
    const std::vector<LatentMoments>* running_per_member = nullptr;
    std::vector<CovarianceProfile>* out_profiles = nullptr; // filled per record when set
};

// Batch scorers: one score per record, batch-mode normalization couples the
// records in the call (composition should be deterministic; the pipeline
// sorts by id).
std::vector<double> score_records_single(const AutoencoderModel<float>& model, const std::vector<Waveform>& records,
                                         const TriggerConfig& trig, const ScoreOptions& opts = {});
std::vector<double> score_records_augmented(const AutoencoderModel<float>& model, const std::vector<Waveform>& records,
                                            const MethodConfig& mcfg, const TriggerConfig& trig, std::uint64_t seed,
                                            const ScoreOptions& opts = {});
std::vector<double> score_records_ensemble(const std::vector<const AutoencoderModel<float>*>& models,
                                           const ProjectionSet& projections, const std::vector<Waveform>& records,
                                           const MethodConfig& mcfg, const TriggerConfig& trig,
                                           const ScoreOptions& opts = {});

// Single-record forms (B=1 batch statistics unless stats are supplied).
double score_single(const AutoencoderModel<float>& model, const Waveform& w, const TriggerConfig& trig,
                    const ScoreOptions& opts = {});
double score_augmented(const AutoencoderModel<float>& model, const Waveform& w, const MethodConfig& mcfg,
                       const TriggerConfig& trig, std::uint64_t seed, const ScoreOptions& opts = {});
double score_ensemble(const std::vector<const AutoencoderModel<float>*>& models, const ProjectionSet& projections,
                      const Waveform& w, const MethodConfig& mcfg, const TriggerConfig& trig,
                      const ScoreOptions& opts = {});

} // namespace covdet
