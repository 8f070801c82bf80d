#include "covdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "covdet/optimizer.hpp"
#include "covdet/rng.hpp"

namespace covdet {

void TrainConfig::validate() const {
    require(batch_size >= 1, ErrorKind::usage, "train: batch_size must be positive");
    require(epochs >= 1, ErrorKind::usage, "train: epochs must be positive");
    require(lr >= 0.0, ErrorKind::usage, "train: lr must be nonnegative");
    require(denoise_sigma >= 0.0, ErrorKind::usage, "train: denoise_sigma must be nonnegative");
    require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorKind::usage,
            "train: validation_fraction must be in (0,1)");
}

TrainingSet::TrainingSet(const std::vector<Waveform>& labeled) {
    records.reserve(labeled.size());
    for (const auto& w : labeled) {
        Waveform stripped = w;
        stripped.label = Label::unlabeled;
        stripped.onset_index.reset();
        records.push_back(std::move(stripped));
    }
}

namespace {

Tensor3<float> assemble_batch(const std::vector<Waveform>& records, const std::vector<std::size_t>& idx,
                              std::size_t begin, std::size_t end) {
    const int b = static_cast<int>(end - begin);
    Tensor3<float> batch(b, kChannels, kWindowSamples);
    for (int bi = 0; bi < b; ++bi) {
        const Waveform& w = records[idx[begin + static_cast<std::size_t>(bi)]];
        std::copy(w.samples.begin(), w.samples.end(), batch.row(bi, 0));
    }
    return batch;
}

double dataset_loss(AutoencoderModel<float>& model, const std::vector<Waveform>& records,
                    const std::vector<std::size_t>& idx, int batch_size) {
    double total = 0.0;
    for (std::size_t begin = 0; begin < idx.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(idx.size(), begin + static_cast<std::size_t>(batch_size));
        Tensor3<float> batch = assemble_batch(records, idx, begin, end);
        Tensor3<float> out = model.decode(model.encode(batch));
        total += reconstruction_loss(batch, out) * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(idx.size());
}

std::vector<float> snapshot_values(AutoencoderModel<float>& model) {
    std::vector<float> out;
    for (auto* p : model.parameters()) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
}

void restore_values(AutoencoderModel<float>& model, const std::vector<float>& snapshot) {
    std::size_t at = 0;
    for (auto* p : model.parameters()) {
        std::copy(snapshot.begin() + static_cast<std::ptrdiff_t>(at),
                  snapshot.begin() + static_cast<std::ptrdiff_t>(at + p->size()), p->value.begin());
        at += p->size();
    }
}

LatentMoments fit_latent_moments(AutoencoderModel<float>& model, const std::vector<Waveform>& records,
                                 int batch_size) {
    const int c_lat = model.arch.latent_channels();
    std::vector<double> sum(static_cast<std::size_t>(c_lat), 0.0), sum2(static_cast<std::size_t>(c_lat), 0.0);
    std::size_t count = 0;
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t begin = 0; begin < idx.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(idx.size(), begin + static_cast<std::size_t>(batch_size));
        Tensor3<float> latent = model.encode(assemble_batch(records, idx, begin, end));
        for (int bi = 0; bi < latent.b; ++bi)
            for (int ci = 0; ci < c_lat; ++ci) {
                const float* row = latent.row(bi, ci);
                for (int t = 0; t < latent.n; ++t) {
                    sum[static_cast<std::size_t>(ci)] += row[t];
                    sum2[static_cast<std::size_t>(ci)] += static_cast<double>(row[t]) * row[t];
                }
            }
        count += (end - begin) * static_cast<std::size_t>(latent.n);
    }
    LatentMoments stats;
    stats.mean.resize(static_cast<std::size_t>(c_lat));
    stats.var.resize(static_cast<std::size_t>(c_lat));
    for (int ci = 0; ci < c_lat; ++ci) {
        const double mean = sum[static_cast<std::size_t>(ci)] / static_cast<double>(count);
        const double var = std::max(0.0, sum2[static_cast<std::size_t>(ci)] / static_cast<double>(count) - mean * mean);
        stats.mean[static_cast<std::size_t>(ci)] = static_cast<float>(mean);
        stats.var[static_cast<std::size_t>(ci)] = static_cast<float>(var);
    }
    return stats;
}

} // namespace

TrainResult train(const ArchitectureConfig& arch, const TrainingSet& data, const TrainConfig& cfg) {
    cfg.validate();
    const auto& records = data.records;
    require(!records.empty(), ErrorKind::data, "train: empty dataset");
    for (const auto& w : records)
        require(w.n == kWindowSamples, ErrorKind::data,
                "train: record '" + w.id + "' has " + std::to_string(w.n) + " samples, expected " +
                    std::to_string(kWindowSamples) + " (preprocess first)");

    // carve the validation split from the (unlabeled) training stream
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(substream(cfg.seed, "val_split"));
    split_rng.shuffle(order);
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(records.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, records.size() - 1);
    require(records.size() >= 2, ErrorKind::data, "train: need at least 2 records to carve a validation split");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    TrainResult res;
    res.model = build_model<float>(arch, substream(cfg.seed, "init"));
    auto params = res.model.parameters();
    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(train_idx.size()));

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<float> best_params;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(substream(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(train_idx);

        double train_loss_acc = 0.0;
        for (std::size_t begin = 0; begin < train_idx.size(); begin += static_cast<std::size_t>(batch)) {
            const std::size_t end = std::min(train_idx.size(), begin + static_cast<std::size_t>(batch));
            Tensor3<float> clean = assemble_batch(records, train_idx, begin, end);
            Tensor3<float> input = clean;
            if (cfg.denoise_sigma > 0.0) {
                for (auto& v : input.v) v += static_cast<float>(epoch_rng.normal(0.0, cfg.denoise_sigma));
            }
            ModelTrace<float> trace;
            Tensor3<float> out = res.model.forward_train(input, trace);
            Tensor3<float> d_out;
            const double loss = reconstruction_loss_backward(clean, out, d_out);
            res.model.backward(d_out, trace);
            adam_step<float>(params, {.lr = cfg.lr});
            train_loss_acc += loss * static_cast<double>(end - begin);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_loss_acc / static_cast<double>(train_idx.size());
        stats.val_loss = dataset_loss(res.model, records, val_idx, batch);
        res.history.push_back(stats);
        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            res.best_epoch = epoch;
            best_params = snapshot_values(res.model);
        }
    }

    restore_values(res.model, best_params);
    res.latent_stats = fit_latent_moments(res.model, records, batch);
    return res;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise_runtime("cannot write history csv: " + path.string());
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : history) {
        char line[96];
        std::snprintf(line, sizeof(line), "%d,%.8f,%.8f\n", e.epoch, e.train_loss, e.val_loss);
        out << line;
    }
}

} // namespace covdet
