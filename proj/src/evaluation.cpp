#include "covdet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "covdet/parallel.hpp"
#include "covdet/rng.hpp"

namespace covdet {

double roc_auc(const std::vector<ScoredRecord>& records) {
    std::size_t n_event = 0, n_noise = 0;
    for (const auto& r : records) {
        require(std::isfinite(r.score), ErrorKind::data, "roc_auc: non-finite score for '" + r.id + "'");
        if (r.label == Label::event)
            ++n_event;
        else if (r.label == Label::noise)
            ++n_noise;
        else
            raise_data("roc_auc: record '" + r.id + "' is unlabeled");
    }
    require(n_event > 0 && n_noise > 0, ErrorKind::data, "roc_auc: need both event and noise records");

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return records[a].score < records[b].score; });

    // tie-averaged ranks, 1-based
    double rank_sum_events = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && records[order[j + 1]].score == records[order[i]].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t u = i; u <= j; ++u)
            if (records[order[u]].label == Label::event) rank_sum_events += avg_rank;
        i = j + 1;
    }
    const double ne = static_cast<double>(n_event);
    return (rank_sum_events - ne * (ne + 1.0) / 2.0) / (ne * static_cast<double>(n_noise));
}

std::vector<std::vector<std::size_t>> kfold_split(const std::vector<Label>& labels, int k, std::uint64_t seed) {
    require(k >= 2, ErrorKind::usage, "kfold: k must be >= 2");
    require(labels.size() >= static_cast<std::size_t>(k), ErrorKind::data,
            "kfold: fewer records than folds (" + std::to_string(labels.size()) + " < " + std::to_string(k) + ")");

    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    const Label classes[] = {Label::event, Label::noise, Label::unlabeled};
    for (const Label cls : classes) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        if (idx.empty()) continue;
        Rng rng(substream(seed, "kfold", static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);

        // chunk sizes base/base+1; the +1 chunks go to the currently smallest folds
        const std::size_t base = idx.size() / static_cast<std::size_t>(k);
        const std::size_t rem = idx.size() % static_cast<std::size_t>(k);
        std::vector<int> fold_order(static_cast<std::size_t>(k));
        std::iota(fold_order.begin(), fold_order.end(), 0);
        std::stable_sort(fold_order.begin(), fold_order.end(),
                         [&](int a, int b) { return folds[static_cast<std::size_t>(a)].size() < folds[static_cast<std::size_t>(b)].size(); });
        std::size_t at = 0;
        for (int rank = 0; rank < k; ++rank) {
            const int f = fold_order[static_cast<std::size_t>(rank)];
            const std::size_t take = base + (static_cast<std::size_t>(rank) < rem ? 1 : 0);
            for (std::size_t u = 0; u < take; ++u) folds[static_cast<std::size_t>(f)].push_back(idx[at++]);
        }
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

namespace {

struct PreparedViews {
    std::vector<Waveform> train_view; // random crop, training jitter stream
    std::vector<Waveform> test_view;  // deterministic crop, test jitter stream
};

PreparedViews prepare_views(const std::vector<Waveform>& records, const PreprocessConfig& prep, std::uint64_t seed) {
    PreparedViews views;
    views.train_view.resize(records.size());
    views.test_view.resize(records.size());
    PreprocessConfig train_cfg = prep;
    train_cfg.crop = CropMode::random;
    PreprocessConfig test_cfg = prep;
    test_cfg.crop = CropMode::deterministic;
    parallel_ranges(records.size(), 64, [&](int, std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            views.train_view[i] = preprocess(records[i], train_cfg, substream(seed, "prep_train", hash_str(records[i].id)));
            views.test_view[i] = preprocess(records[i], test_cfg, substream(seed, "prep_test", hash_str(records[i].id)));
        }
    });
    return views;
}

std::vector<Waveform> select(const std::vector<Waveform>& all, const std::vector<std::size_t>& idx) {
    std::vector<Waveform> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& idx) {
    std::vector<bool> in(n, false);
    for (auto i : idx) in[i] = true;
    std::vector<std::size_t> out;
    out.reserve(n - idx.size());
    for (std::size_t i = 0; i < n; ++i)
        if (!in[i]) out.push_back(i);
    return out;
}

struct FoldModels {
    std::vector<AutoencoderModel<float>> members;
    ProjectionSet projections;
    std::vector<LatentMoments> member_stats;
};

FoldModels train_fold(const EvaluationPlan& plan, const std::vector<Waveform>& train_records,
                      std::uint64_t fold_seed) {
    FoldModels out;
    const int members = plan.method.method == Method::ensemble ? plan.method.k : 1;
    for (int m = 0; m < members; ++m) {
        TrainConfig tc = plan.train;
        tc.seed = members == 1 ? fold_seed : substream(fold_seed, "member", static_cast<std::uint64_t>(m));
        TrainResult tr = train(plan.arch, TrainingSet(train_records), tc);
        out.member_stats.push_back(tr.latent_stats);
        out.members.push_back(std::move(tr.model));
    }
    if (plan.method.method == Method::ensemble) {
        std::vector<const AutoencoderModel<float>*> model_ptrs;
        for (auto& m : out.members) model_ptrs.push_back(&m);
        std::vector<Waveform> proj_data = train_records;
        if (static_cast<int>(proj_data.size()) > plan.proj_max_records) {
            Rng rng(substream(fold_seed, "proj_subsample"));
            rng.shuffle(proj_data);
            proj_data.resize(static_cast<std::size_t>(plan.proj_max_records));
        }
        ProjectionTrainConfig pc = plan.proj;
        pc.seed = substream(fold_seed, "proj");
        out.projections = train_projections(model_ptrs, TrainingSet(proj_data), pc).projections;
    } else {
        out.projections = ProjectionSet::identity(1, plan.arch.latent_channels());
    }
    return out;
}

std::vector<ScoredRecord> score_fold(const EvaluationPlan& plan, const FoldModels& models,
                                     const std::vector<Waveform>& test_records, std::uint64_t fold_seed) {
    // deterministic batch composition for batch-mode latent statistics
    std::vector<Waveform> sorted = test_records;
    std::sort(sorted.begin(), sorted.end(), [](const Waveform& a, const Waveform& b) { return a.id < b.id; });

    ScoreOptions opts;
    opts.stats = plan.stats;
    if (plan.stats == StatsSource::running) {
        opts.running = &models.member_stats[0];
        opts.running_per_member = &models.member_stats;
    }

    std::vector<double> scores;
    switch (plan.method.method) {
        case Method::single:
            scores = score_records_single(models.members[0], sorted, plan.trigger, opts);
            break;
        case Method::augmented:
            scores = score_records_augmented(models.members[0], sorted, plan.method, plan.trigger,
                                             substream(fold_seed, "augment"), opts);
            break;
        case Method::ensemble: {
            std::vector<const AutoencoderModel<float>*> ptrs;
            for (const auto& m : models.members) ptrs.push_back(&m);
            scores = score_records_ensemble(ptrs, models.projections, sorted, plan.method, plan.trigger, opts);
            break;
        }
    }
    std::vector<ScoredRecord> out;
    out.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) out.push_back({sorted[i].id, scores[i], sorted[i].label});
    return out;
}

void save_fold_artifacts(const std::filesystem::path& out_dir, int fold, const FoldModels& models,
                         const std::vector<ScoredRecord>& scored, const std::string& method) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    const std::string prefix = "fold" + std::to_string(fold);
    if (models.members.size() == 1) {
        save_model(out_dir / (prefix + "_model.rcvw"), models.members[0], models.member_stats[0]);
    } else {
        for (std::size_t m = 0; m < models.members.size(); ++m)
            save_model(out_dir / (prefix + "_member" + std::to_string(m) + ".rcvw"), models.members[m],
                       models.member_stats[m]);
        save_projections(out_dir / (prefix + "_projections.rcvw"), models.projections);
    }
    write_scores_csv(out_dir / (prefix + "_scores.csv"), scored, method);
}

} // namespace

EvalReport evaluate(const EvaluationPlan& plan, const std::vector<Waveform>& train_records,
                    const std::string& train_name, const std::vector<Waveform>* test_records,
                    const std::string& test_name, const std::filesystem::path& out_dir) {
    require(plan.k_folds >= 2, ErrorKind::usage, "evaluate: k_folds must be >= 2");
    plan.arch.validate();
    plan.trigger.validate(plan.arch.latent_rate_hz());

    EvalReport report;
    report.method = method_name(plan.method.method);
    report.train_dataset = train_name;
    report.test_dataset = test_records ? test_name : train_name;

    const PreparedViews views = prepare_views(train_records, plan.prep, plan.seed);

    if (!test_records) {
        // 5-fold CV: held-out folds are scored, so no train/test overlap by id
        std::vector<Label> labels;
        for (const auto& w : train_records) labels.push_back(w.label);
        const auto folds = kfold_split(labels, plan.k_folds, substream(plan.seed, "folds"));
        for (int f = 0; f < plan.k_folds; ++f) {
            const std::uint64_t fold_seed = substream(plan.seed, "fold", static_cast<std::uint64_t>(f));
            const auto train_idx = complement(train_records.size(), folds[static_cast<std::size_t>(f)]);
            const FoldModels models = train_fold(plan, select(views.train_view, train_idx), fold_seed);
            const auto test_set =
                onset_margin_filter(select(views.test_view, folds[static_cast<std::size_t>(f)]), plan.onset_margin_seconds);
            const auto scored = score_fold(plan, models, test_set, fold_seed);
            save_fold_artifacts(out_dir, f, models, scored, report.method);
            report.folds.push_back({f, roc_auc(scored), train_idx.size(), test_set.size()});
        }
    } else {
        const PreparedViews test_views = prepare_views(*test_records, plan.prep, plan.seed);
        const auto test_set = onset_margin_filter(test_views.test_view, plan.onset_margin_seconds);
        for (int f = 0; f < plan.k_folds; ++f) {
            const std::uint64_t fold_seed = substream(plan.seed, "fold", static_cast<std::uint64_t>(f));
            const FoldModels models = train_fold(plan, views.train_view, fold_seed);
            const auto scored = score_fold(plan, models, test_set, fold_seed);
            save_fold_artifacts(out_dir, f, models, scored, report.method);
            report.folds.push_back({f, roc_auc(scored), views.train_view.size(), test_set.size()});
        }
    }

    double sum = 0.0;
    for (const auto& f : report.folds) sum += f.auc;
    report.mean_auc = sum / static_cast<double>(report.folds.size());
    double var = 0.0;
    for (const auto& f : report.folds) var += (f.auc - report.mean_auc) * (f.auc - report.mean_auc);
    report.std_auc = report.folds.size() > 1 ? std::sqrt(var / static_cast<double>(report.folds.size() - 1)) : 0.0;
    return report;
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredRecord>& records,
                      const std::string& method) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise_runtime("cannot write scores csv: " + path.string());
    out << "id,label,method,score\n";
    for (const auto& r : records) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%s,%s,%.9g\n", r.id.c_str(), label_name(r.label).c_str(), method.c_str(),
                      r.score);
        out << line;
    }
}

void write_report_csv(const std::filesystem::path& folds_csv, const std::filesystem::path& summary_csv,
                      const std::vector<EvalReport>& reports) {
    std::ofstream folds(folds_csv, std::ios::trunc);
    if (!folds) raise_runtime("cannot write report csv: " + folds_csv.string());
    folds << "method,train,test,fold,auc,n_train,n_test\n";
    for (const auto& rep : reports)
        for (const auto& f : rep.folds) {
            char line[256];
            std::snprintf(line, sizeof(line), "%s,%s,%s,%d,%.6f,%zu,%zu\n", rep.method.c_str(),
                          rep.train_dataset.c_str(), rep.test_dataset.c_str(), f.fold, f.auc, f.n_train, f.n_test);
            folds << line;
        }
    std::ofstream summary(summary_csv, std::ios::trunc);
    if (!summary) raise_runtime("cannot write report csv: " + summary_csv.string());
    summary << "method,train,test,mean_auc,std_auc,folds\n";
    for (const auto& rep : reports) {
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%s,%s,%.6f,%.6f,%zu\n", rep.method.c_str(), rep.train_dataset.c_str(),
                      rep.test_dataset.c_str(), rep.mean_auc, rep.std_auc, rep.folds.size());
        summary << line;
    }
}

void write_report_table(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise_runtime("cannot write report table: " + path.string());
    std::vector<std::string> trains, tests;
    for (const auto& r : reports) {
        if (std::find(trains.begin(), trains.end(), r.train_dataset) == trains.end()) trains.push_back(r.train_dataset);
        if (std::find(tests.begin(), tests.end(), r.test_dataset) == tests.end()) tests.push_back(r.test_dataset);
    }
    out << "ROC-AUC (mean +/- std over folds)\n\n";
    for (const auto& train : trains) {
        out << "training: " << train << "\n";
        for (const auto& test : tests) {
            bool any = false;
            for (const auto& r : reports)
                if (r.train_dataset == train && r.test_dataset == test) any = true;
            if (!any) continue;
            out << "  testing: " << test << "\n";
            for (const auto& r : reports) {
                if (r.train_dataset != train || r.test_dataset != test) continue;
                char line[160];
                std::snprintf(line, sizeof(line), "    %-12s %.3f +/- %.3f\n", r.method.c_str(), r.mean_auc, r.std_auc);
                out << line;
            }
        }
        out << "\n";
    }
}

} // namespace covdet
