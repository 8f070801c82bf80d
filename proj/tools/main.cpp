#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "covdet/config.hpp"
#include "covdet/parallel.hpp"
#include "covdet/rng.hpp"

namespace fs = std::filesystem;
using namespace covdet;

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;
    std::int64_t seed = -1;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "config file (flat INI, see README)");
    cmd->add_option("--set", args.overrides, "override a config value, e.g. --set train.epochs=5")->take_all();
    cmd->add_option("--seed", args.seed, "override every seed in the run");
    cmd->add_option("--threads", args.threads, "worker threads (1 = fully serial)");
}

RunConfig make_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_file.empty()) cfg.load_file(args.config_file);
    for (const auto& o : args.overrides) cfg.apply_override(o);
    if (args.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(args.seed);
        cfg.synth.seed = static_cast<std::uint64_t>(args.seed);
    }
    if (args.threads >= 0) cfg.threads = args.threads;
    set_threads(cfg.threads);
    return cfg;
}

std::vector<Waveform> load_or_die(const fs::path& manifest) {
    LoadResult res = load_dataset(manifest);
    for (const auto& e : res.errors) std::cerr << "record error [" << e.id << "]: " << e.message << "\n";
    if (res.records.empty() && !res.errors.empty())
        raise_data("no loadable records in manifest " + manifest.string());
    return std::move(res.records);
}

std::vector<Waveform> preprocess_view(const std::vector<Waveform>& records, PreprocessConfig prep, CropMode crop,
                                      std::uint64_t seed, const char* tag) {
    prep.crop = crop;
    std::vector<Waveform> out(records.size());
    parallel_ranges(records.size(), 64, [&](int, std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i)
            out[i] = preprocess(records[i], prep, substream(seed, tag, hash_str(records[i].id)));
    });
    return out;
}

int cmd_synth(const CommonArgs& common, const std::string& out_dir) {
    RunConfig cfg = make_config(common);
    const BuildResult res = build_dataset(cfg.synth, out_dir);
    cfg.dump(fs::path(out_dir) / "effective_config.ini");
    std::ifstream report(res.report);
    std::cout << report.rdbuf();
    std::cout << "container: " << res.container.string() << "\n";
    std::cout << "manifest: " << res.manifest.string() << "\n";
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& manifest, const std::string& out_dir) {
    RunConfig cfg = make_config(common);
    fs::create_directories(out_dir);

    const std::vector<Waveform> raw = load_or_die(manifest);
    const TrainingSet data(preprocess_view(raw, cfg.prep, CropMode::random, cfg.seed, "prep_train"));

    if (cfg.method.method == Method::ensemble) {
        std::vector<AutoencoderModel<float>> members;
        for (int m = 0; m < cfg.method.k; ++m) {
            TrainConfig tc = cfg.train;
            tc.seed = substream(cfg.seed, "member", static_cast<std::uint64_t>(m));
            TrainResult tr = train(cfg.arch, data, tc);
            save_model(fs::path(out_dir) / ("member" + std::to_string(m) + ".rcvw"), tr.model, tr.latent_stats);
            write_history_csv(fs::path(out_dir) / ("member" + std::to_string(m) + "_history.csv"), tr.history);
            std::cout << "member " << m << ": best epoch " << tr.best_epoch << ", val loss "
                      << tr.history[static_cast<std::size_t>(tr.best_epoch)].val_loss << "\n";
            members.push_back(std::move(tr.model));
        }
        std::vector<const AutoencoderModel<float>*> ptrs;
        for (const auto& m : members) ptrs.push_back(&m);
        std::vector<Waveform> proj_data = data.records;
        if (static_cast<int>(proj_data.size()) > cfg.proj_max_records) {
            Rng rng(substream(cfg.seed, "proj_subsample"));
            rng.shuffle(proj_data);
            proj_data.resize(static_cast<std::size_t>(cfg.proj_max_records));
        }
        ProjectionTrainConfig pc = cfg.proj;
        pc.seed = substream(cfg.seed, "proj");
        ProjectionTrainResult pr = train_projections(ptrs, TrainingSet(proj_data), pc);
        save_projections(fs::path(out_dir) / "projections.rcvw", pr.projections);
        std::cout << "projections: final loss " << pr.epoch_loss.back() << "\n";
    } else {
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seed;
        TrainResult tr = train(cfg.arch, data, tc);
        save_model(fs::path(out_dir) / "model.rcvw", tr.model, tr.latent_stats);
        write_history_csv(fs::path(out_dir) / "history.csv", tr.history);
        std::cout << "best epoch " << tr.best_epoch << ", val loss "
                  << tr.history[static_cast<std::size_t>(tr.best_epoch)].val_loss << "\n";
    }
    cfg.dump(fs::path(out_dir) / "effective_config.ini");
    return 0;
}

int cmd_score(const CommonArgs& common, const std::string& model_path, const std::string& manifest,
              const std::string& out_csv, const std::string& profiles_csv) {
    RunConfig cfg = make_config(common);

    const std::vector<Waveform> raw = load_or_die(manifest);
    std::vector<Waveform> records = preprocess_view(raw, cfg.prep, CropMode::deterministic, cfg.seed, "prep_test");
    records = onset_margin_filter(records, cfg.onset_margin_seconds);
    std::sort(records.begin(), records.end(), [](const Waveform& a, const Waveform& b) { return a.id < b.id; });
    require(!records.empty(), ErrorKind::data, "score: no records left after the onset margin filter");

    std::vector<CovarianceProfile> profiles;
    ScoreOptions opts;
    opts.stats = cfg.stats;
    if (!profiles_csv.empty()) opts.out_profiles = &profiles;

    std::vector<double> scores;
    std::vector<LatentMoments> member_stats;
    if (cfg.method.method == Method::ensemble) {
        std::vector<AutoencoderModel<float>> members;
        for (int m = 0; m < cfg.method.k; ++m) {
            LatentMoments stats;
            members.push_back(load_model(fs::path(model_path) / ("member" + std::to_string(m) + ".rcvw"), &stats));
            member_stats.push_back(std::move(stats));
        }
        const ProjectionSet projections = load_projections(fs::path(model_path) / "projections.rcvw");
        std::vector<const AutoencoderModel<float>*> ptrs;
        for (const auto& m : members) ptrs.push_back(&m);
        opts.running_per_member = &member_stats;
        scores = score_records_ensemble(ptrs, projections, records, cfg.method, cfg.trigger, opts);
    } else {
        LatentMoments stats;
        const AutoencoderModel<float> model = load_model(model_path, &stats);
        opts.running = &stats;
        if (cfg.method.method == Method::single)
            scores = score_records_single(model, records, cfg.trigger, opts);
        else
            scores = score_records_augmented(model, records, cfg.method, cfg.trigger,
                                             substream(cfg.seed, "score_augment"), opts);
    }

    std::vector<ScoredRecord> scored;
    for (std::size_t i = 0; i < records.size(); ++i) scored.push_back({records[i].id, scores[i], records[i].label});
    write_scores_csv(out_csv, scored, method_name(cfg.method.method));
    const fs::path out_parent = fs::path(out_csv).parent_path();
    cfg.dump((out_parent.empty() ? fs::path(".") : out_parent) / "effective_config.ini");

    if (!profiles_csv.empty()) {
        std::ofstream out(profiles_csv, std::ios::trunc);
        if (!out) raise_runtime("cannot write profiles csv: " + profiles_csv);
        out << "id,lag_seconds,value\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& p = profiles[i];
            for (int lag = -p.max_lag; lag <= p.max_lag; ++lag) {
                char line[128];
                std::snprintf(line, sizeof(line), "%s,%.6f,%.9g\n", records[i].id.c_str(),
                              static_cast<double>(lag) / p.latent_rate_hz, p.at(lag));
                out << line;
            }
        }
    }
    std::cout << "scored " << records.size() << " records -> " << out_csv << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& common, const std::string& train_manifest, const std::string& test_manifest,
                 const std::string& out_dir) {
    RunConfig cfg = make_config(common);
    fs::create_directories(out_dir);

    const std::vector<Waveform> train_records = load_or_die(train_manifest);
    const std::string train_name = fs::path(train_manifest).stem().string();

    EvalReport report;
    if (test_manifest.empty()) {
        report = evaluate(cfg.plan(), train_records, train_name, nullptr, "", out_dir);
    } else {
        const std::vector<Waveform> test_records = load_or_die(test_manifest);
        report = evaluate(cfg.plan(), train_records, train_name, &test_records,
                          fs::path(test_manifest).stem().string(), out_dir);
    }

    write_report_csv(fs::path(out_dir) / "report_folds.csv", fs::path(out_dir) / "report_summary.csv", {report});
    write_report_table(fs::path(out_dir) / "report.txt", {report});
    cfg.dump(fs::path(out_dir) / "effective_config.ini");

    std::cout << "method " << report.method << ", train " << report.train_dataset << ", test " << report.test_dataset
              << "\n";
    for (const auto& f : report.folds)
        std::cout << "fold " << f.fold << ": auc " << f.auc << " (train " << f.n_train << ", test " << f.n_test
                  << ")\n";
    std::cout << "mean auc " << report.mean_auc << " +/- " << report.std_auc << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised seismic event detector: autoencoder latents + lag-covariance trigger"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string out_dir, manifest, model_path, out_csv, profiles_csv, train_manifest, test_manifest;

    CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    add_common(synth, common);
    synth->add_option("--out", out_dir, "output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "train autoencoder(s) on a manifest");
    add_common(train_cmd, common);
    train_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    std::string method_flag;
    train_cmd->add_option("--method", method_flag, "single | augmented | ensemble");
    double denoise_flag = -1.0;
    train_cmd->add_option("--denoise", denoise_flag, "denoising sigma (e.g. 0.2)");

    CLI::App* score = app.add_subcommand("score", "score records with a trained model");
    add_common(score, common);
    score->add_option("--model", model_path, "model checkpoint (or ensemble directory)")->required();
    score->add_option("--manifest", manifest, "dataset manifest")->required();
    score->add_option("--out", out_csv, "output scores csv")->required();
    score->add_option("--dump-profiles", profiles_csv, "also dump covariance profiles csv");
    std::string score_method_flag;
    score->add_option("--method", score_method_flag, "single | augmented | ensemble");

    CLI::App* eval = app.add_subcommand("evaluate", "k-fold CV or cross-dataset evaluation");
    add_common(eval, common);
    eval->add_option("--train-manifest", train_manifest, "training dataset manifest")->required();
    eval->add_option("--test-manifest", test_manifest, "test dataset manifest (omit for CV)");
    eval->add_option("--out", out_dir, "output directory")->required();
    std::string eval_method_flag;
    eval->add_option("--method", eval_method_flag, "single | augmented | ensemble");

    try {
        app.parse(argc, argv);
        if (!method_flag.empty()) common.overrides.push_back("method.method=" + method_flag);
        if (!score_method_flag.empty()) common.overrides.push_back("method.method=" + score_method_flag);
        if (!eval_method_flag.empty()) common.overrides.push_back("method.method=" + eval_method_flag);
        if (denoise_flag >= 0.0) common.overrides.push_back("train.denoise_sigma=" + std::to_string(denoise_flag));

        if (synth->parsed()) return cmd_synth(common, out_dir);
        if (train_cmd->parsed()) return cmd_train(common, manifest, out_dir);
        if (score->parsed()) return cmd_score(common, model_path, manifest, out_csv, profiles_csv);
        if (eval->parsed()) return cmd_evaluate(common, train_manifest, test_manifest, out_dir);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
