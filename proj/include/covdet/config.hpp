#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "covdet/evaluation.hpp"
#include "covdet/synth.hpp"

namespace covdet {

// Whole-pipeline configuration. Defaults pin the standard protocol values
// (30 s window, 1-20 Hz band, 1e-6 jitter, batch 256, 20 epochs, lr 1e-4,
// sigma0 2.5 s, k = 5); a flat INI-style file with [section] headers
// overrides them, and --set section.key=value overrides the file.
struct RunConfig {
    std::uint64_t seed = 42;
    int threads = 0; // 0 = hardware concurrency

    PreprocessConfig prep;
    ArchitectureConfig arch;
    TrainConfig train;
    TriggerConfig trigger;
    MethodConfig method;
    ProjectionTrainConfig proj;
    SynthConfig synth;

    int k_folds = 5;
    double onset_margin_seconds = 3.0;
    StatsSource stats = StatsSource::batch;
    int proj_max_records = 1024;

    EvaluationPlan plan() const;

    void load_file(const std::filesystem::path& path);
    void apply_override(const std::string& assignment); // "section.key=value"
    void dump(const std::filesystem::path& path) const;
};

} // namespace covdet
