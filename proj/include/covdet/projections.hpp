#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "covdet/model.hpp"
#include "covdet/trainer.hpp"

namespace covdet {

// Per-ensemble-member channel-mixing matrices that align latent spaces of
// independently trained autoencoders.
struct ProjectionSet {
    int channels = 0;
    std::vector<ParamTensor<float>> mats; // each (channels, channels)

    static ProjectionSet identity(int k, int channels);
    int k() const { return static_cast<int>(mats.size()); }

    // out[c', t] = sum_c P[c', c] z[c, t], one member's matrix
    Tensor3<float> apply(int member, const Tensor3<float>& latents) const;
};

struct ProjectionTrainConfig {
    int epochs = 30;
    double lr = 1e-2;
    int batch_size = 64;
    double anchor_weight = 0.01; // soft pull of P_i z_i towards z_i, guards the zero collapse
    std::uint64_t seed = 1;
};

struct ProjectionTrainResult {
    ProjectionSet projections;
    std::vector<double> epoch_loss; // pairwise + anchor, per epoch
};

// Trains per-member matrices minimizing the summed RMS difference between
// pairs of projected latents over the dataset, with the autoencoder weights
// frozen. Initialized at identity.
ProjectionTrainResult train_projections(const std::vector<const AutoencoderModel<float>*>& models,
                                        const TrainingSet& data, const ProjectionTrainConfig& cfg);

void save_projections(const std::filesystem::path& path, const ProjectionSet& projections);
ProjectionSet load_projections(const std::filesystem::path& path);

} // namespace covdet
