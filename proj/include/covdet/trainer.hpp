#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "covdet/model.hpp"
#include "covdet/waveform.hpp"

namespace covdet {

struct TrainConfig {
    int batch_size = 256;
    int epochs = 20;
    double lr = 1e-4;
    double denoise_sigma = 0.0; // 0.2 for the denoising variant
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

// Training inputs carry no labels by construction; constructing one strips
// label and onset metadata so no training code path can see them.
struct TrainingSet {
    std::vector<Waveform> records;

    explicit TrainingSet(const std::vector<Waveform>& labeled);
    TrainingSet() = default;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    AutoencoderModel<float> model; // parameters of the best-validation epoch
    std::vector<EpochStats> history;
    int best_epoch = -1;
    LatentMoments latent_stats; // fitted on the training data with the final model
};

// Shuffle/batch each epoch; with denoise_sigma > 0, Gaussian noise is added to
// the inputs and the loss is computed against the clean ones. One Adam step
// per batch; returns the checkpoint with the lowest validation loss.
TrainResult train(const ArchitectureConfig& arch, const TrainingSet& data, const TrainConfig& cfg);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

} // namespace covdet
