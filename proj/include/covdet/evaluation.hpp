#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "covdet/model.hpp"
#include "covdet/preprocess.hpp"
#include "covdet/projections.hpp"
#include "covdet/trainer.hpp"
#include "covdet/trigger.hpp"
#include "covdet/waveform.hpp"

namespace covdet {

struct ScoredRecord {
    std::string id;
    double score = 0.0;
    Label label = Label::unlabeled;
};

// Rank-statistic (Mann-Whitney) ROC-AUC with ties counted 0.5.
double roc_auc(const std::vector<ScoredRecord>& records);

// Disjoint label-stratified folds with sizes within one of each other,
// deterministic from the seed. Returns per-fold index lists.
std::vector<std::vector<std::size_t>> kfold_split(const std::vector<Label>& labels, int k, std::uint64_t seed);

struct EvaluationPlan {
    MethodConfig method;
    ArchitectureConfig arch;
    TrainConfig train;
    ProjectionTrainConfig proj;
    TriggerConfig trigger;
    PreprocessConfig prep;
    int k_folds = 5;
    std::uint64_t seed = 7;
    double onset_margin_seconds = 3.0;
    StatsSource stats = StatsSource::batch;
    int proj_max_records = 1024; // cap on records used for projection training
};

struct FoldResult {
    int fold = 0;
    double auc = 0.0;
    std::size_t n_train = 0, n_test = 0;
};

struct EvalReport {
    std::string method;
    std::string train_dataset, test_dataset;
    std::vector<FoldResult> folds;
    double mean_auc = 0.0;
    double std_auc = 0.0; // sample standard deviation across folds
};

// Same-manifest form: k-fold cross-validation (train on k-1 folds without
// labels, onset-margin-filter and score the held-out fold). Cross-dataset
// form (test_records != nullptr): per fold seed, train on all of the training
// dataset and score all of the test dataset. When out_dir is non-empty, fold
// checkpoints and scores are written there.
EvalReport evaluate(const EvaluationPlan& plan, const std::vector<Waveform>& train_records,
                    const std::string& train_name, const std::vector<Waveform>* test_records = nullptr,
                    const std::string& test_name = "", const std::filesystem::path& out_dir = {});

void write_report_csv(const std::filesystem::path& folds_csv, const std::filesystem::path& summary_csv,
                      const std::vector<EvalReport>& reports);
// Text table shaped train-dataset x test-dataset x method.
void write_report_table(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredRecord>& records,
                      const std::string& method);

} // namespace covdet
