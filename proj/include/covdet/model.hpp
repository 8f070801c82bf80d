#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "covdet/layers.hpp"
#include "covdet/waveform.hpp"

namespace covdet {

struct ArchitectureConfig {
    int n_down = 4;
    int base_channels = 8; // channels double per downsampling stage
    int kernel_down = 7;
    int residual_per_stage = 1;
    int kernel_res = 3;

    int stage_channels(int stage) const { return base_channels << stage; }
    int latent_channels() const { return stage_channels(n_down - 1); }
    int latent_length() const {
        int n = kWindowSamples;
        for (int i = 0; i < n_down; ++i) n = (n + 1) / 2;
        return n;
    }
    double latent_rate_hz() const { return kSampleRateHz / static_cast<double>(1 << n_down); }
    void validate() const;
};

// conv(k) -> relu -> conv(k) + skip -> relu, channel preserving
template <class R>
struct ResidualBlock {
    Conv1d<R> conv1, conv2;
};

template <class R>
struct EncoderStage {
    Conv1d<R> down;
    std::vector<ResidualBlock<R>> res;
};

// Saved forward activations for one training batch.
template <class R>
struct ModelTrace {
    struct ResTrace {
        Tensor3<R> in, c1, a1, s;
    };
    struct StageTrace {
        Tensor3<R> in, pre;
        std::vector<ResTrace> res;
    };
    std::vector<StageTrace> enc;
    std::vector<Tensor3<R>> dec_in;  // input to each upsampling conv
    std::vector<Tensor3<R>> dec_pre; // its pre-activation output
};

// Residual convolutional autoencoder over (3, 3000) windows. Downsampling +
// residual stages encode; transposed convolutions decode, restoring each
// stage's recorded length exactly. The final decoder layer is linear.
template <class R>
struct AutoencoderModel {
    ArchitectureConfig arch;
    std::vector<EncoderStage<R>> stages;
    std::vector<ConvTranspose1d<R>> ups;
    std::vector<int> stage_lengths; // input length per depth, e.g. 3000,1500,750,375,188

    std::vector<ParamTensor<R>*> parameters();
    std::size_t parameter_count() const;

    Tensor3<R> encode(const Tensor3<R>& batch) const;
    Tensor3<R> decode(const Tensor3<R>& latent) const;

    Tensor3<R> forward_train(const Tensor3<R>& batch, ModelTrace<R>& trace);
    // Accumulates parameter grads; returns grad w.r.t. the batch input.
    Tensor3<R> backward(const Tensor3<R>& d_out, ModelTrace<R>& trace);

    template <class S>
    AutoencoderModel<S> cast() const;
};

template <class R>
AutoencoderModel<R> build_model(const ArchitectureConfig& arch, std::uint64_t seed);

// Eq-style reconstruction loss: per sample, center input and output per
// channel, take sqrt(mean squared difference over channels and time), then
// average over the batch.
template <class R>
double reconstruction_loss(const Tensor3<R>& x, const Tensor3<R>& y);
// Also fills d(loss)/dy.
template <class R>
double reconstruction_loss_backward(const Tensor3<R>& x, const Tensor3<R>& y, Tensor3<R>& dy);

// Per-latent-channel moments used by running-stats scoring.
struct LatentMoments {
    std::vector<float> mean, var;
    bool empty() const { return mean.empty(); }
};

void save_model(const std::filesystem::path& path, const AutoencoderModel<float>& model,
                const LatentMoments& latent_stats = {});
AutoencoderModel<float> load_model(const std::filesystem::path& path, LatentMoments* latent_stats = nullptr);

} // namespace covdet
