#include "covdet/projections.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "covdet/checkpoint.hpp"
#include "covdet/optimizer.hpp"
#include "covdet/rng.hpp"

namespace covdet {

namespace {
using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
} // namespace

ProjectionSet ProjectionSet::identity(int k, int channels) {
    ProjectionSet set;
    set.channels = channels;
    for (int m = 0; m < k; ++m) {
        ParamTensor<float> p("proj." + std::to_string(m),
                             {static_cast<std::uint32_t>(channels), static_cast<std::uint32_t>(channels)});
        for (int c = 0; c < channels; ++c) p.value[static_cast<std::size_t>(c * channels + c)] = 1.f;
        set.mats.push_back(std::move(p));
    }
    return set;
}

Tensor3<float> ProjectionSet::apply(int member, const Tensor3<float>& latents) const {
    require(member >= 0 && member < k(), ErrorKind::usage, "projection: member index out of range");
    require(latents.c == channels, ErrorKind::data, "projection: channel axis mismatch");
    Tensor3<float> out(latents.b, latents.c, latents.n);
    CMapRM pm(mats[static_cast<std::size_t>(member)].value.data(), channels, channels);
    for (int bi = 0; bi < latents.b; ++bi) {
        CMapRM zm(latents.row(bi, 0), channels, latents.n);
        MapRM ym(out.row(bi, 0), channels, latents.n);
        ym.noalias() = pm * zm;
    }
    return out;
}

ProjectionTrainResult train_projections(const std::vector<const AutoencoderModel<float>*>& models,
                                        const TrainingSet& data, const ProjectionTrainConfig& cfg) {
    require(models.size() >= 2, ErrorKind::usage, "train_projections: need k >= 2 models");
    require(!data.records.empty(), ErrorKind::data, "train_projections: empty dataset");
    require(cfg.epochs >= 1 && cfg.batch_size >= 1 && cfg.lr >= 0.0, ErrorKind::usage,
            "train_projections: invalid config");
    const int k = static_cast<int>(models.size());
    const int c = models[0]->arch.latent_channels();
    const int n = models[0]->arch.latent_length();
    for (const auto* m : models)
        require(m->arch.latent_channels() == c && m->arch.latent_length() == n, ErrorKind::usage,
                "train_projections: members must share the latent shape");

    // encoders are frozen: latents are computed once
    std::vector<Tensor3<float>> latents;
    latents.reserve(static_cast<std::size_t>(k));
    {
        const int n_rec = static_cast<int>(data.records.size());
        for (int m = 0; m < k; ++m) {
            Tensor3<float> z(n_rec, c, n);
            const int chunk = 256;
            for (int begin = 0; begin < n_rec; begin += chunk) {
                const int end = std::min(n_rec, begin + chunk);
                Tensor3<float> batch(end - begin, kChannels, kWindowSamples);
                for (int i = begin; i < end; ++i)
                    std::copy(data.records[static_cast<std::size_t>(i)].samples.begin(),
                              data.records[static_cast<std::size_t>(i)].samples.end(), batch.row(i - begin, 0));
                Tensor3<float> part = models[static_cast<std::size_t>(m)]->encode(batch);
                std::copy(part.v.begin(), part.v.end(), z.v.begin() + static_cast<std::ptrdiff_t>(begin) * c * n);
            }
            latents.push_back(std::move(z));
        }
    }

    ProjectionTrainResult res;
    res.projections = ProjectionSet::identity(k, c);
    std::vector<ParamTensor<float>*> params;
    for (auto& p : res.projections.mats) params.push_back(&p);

    const int n_rec = static_cast<int>(data.records.size());
    std::vector<std::size_t> order(static_cast<std::size_t>(n_rec));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(substream(cfg.seed, "proj_epochs"));

    const double cn = static_cast<double>(c) * n;
    std::vector<MatRM> y(static_cast<std::size_t>(k)), dy(static_cast<std::size_t>(k));
    MatRM diff(c, n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int begin = 0; begin < n_rec; begin += cfg.batch_size) {
            const int end = std::min(n_rec, begin + cfg.batch_size);
            const int b = end - begin;
            double batch_loss = 0.0;
            for (int m = 0; m < k; ++m) dy[static_cast<std::size_t>(m)] = MatRM::Zero(c, c);

            for (int s = begin; s < end; ++s) {
                const std::size_t rec = order[static_cast<std::size_t>(s)];
                for (int m = 0; m < k; ++m) {
                    CMapRM pm(res.projections.mats[static_cast<std::size_t>(m)].value.data(), c, c);
                    CMapRM zm(latents[static_cast<std::size_t>(m)].row(static_cast<int>(rec), 0), c, n);
                    y[static_cast<std::size_t>(m)].noalias() = pm * zm;
                }
                for (int i = 0; i < k; ++i) {
                    CMapRM zi(latents[static_cast<std::size_t>(i)].row(static_cast<int>(rec), 0), c, n);
                    for (int j = i + 1; j < k; ++j) {
                        diff = y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)];
                        const double l = std::sqrt(std::max(1e-24, static_cast<double>(diff.squaredNorm()) / cn));
                        batch_loss += l;
                        const float g = static_cast<float>(1.0 / (cn * l * b));
                        // dL/dY_i = diff * g, accumulated into dP via z^T
                        CMapRM zj(latents[static_cast<std::size_t>(j)].row(static_cast<int>(rec), 0), c, n);
                        dy[static_cast<std::size_t>(i)].noalias() += (diff * g) * zi.transpose();
                        dy[static_cast<std::size_t>(j)].noalias() -= (diff * g) * zj.transpose();
                    }
                    if (cfg.anchor_weight > 0.0) {
                        diff = y[static_cast<std::size_t>(i)] - zi;
                        const double l = std::sqrt(std::max(1e-24, static_cast<double>(diff.squaredNorm()) / cn));
                        batch_loss += cfg.anchor_weight * l;
                        const float g = static_cast<float>(cfg.anchor_weight / (cn * l * b));
                        dy[static_cast<std::size_t>(i)].noalias() += (diff * g) * zi.transpose();
                    }
                }
            }
            for (int m = 0; m < k; ++m) {
                MapRM gm(res.projections.mats[static_cast<std::size_t>(m)].grad.data(), c, c);
                gm = dy[static_cast<std::size_t>(m)];
            }
            adam_step<float>(params, {.lr = cfg.lr});
            epoch_loss += batch_loss / b;
        }
        res.epoch_loss.push_back(epoch_loss / std::max(1, (n_rec + cfg.batch_size - 1) / cfg.batch_size));
    }
    return res;
}

void save_projections(const std::filesystem::path& path, const ProjectionSet& projections) {
    std::vector<TensorRecord> records;
    records.push_back({"proj_meta",
                       {2},
                       {static_cast<float>(projections.k()), static_cast<float>(projections.channels)}});
    for (const auto& p : projections.mats) records.push_back({p.name, p.dims, p.value});
    write_checkpoint(path, records);
}

ProjectionSet load_projections(const std::filesystem::path& path) {
    const auto records = read_checkpoint(path);
    const TensorRecord* meta = find_record(records, "proj_meta");
    if (!meta || meta->data.size() != 2) raise_data("projection file missing proj_meta: " + path.string());
    const int k = static_cast<int>(meta->data[0]);
    const int channels = static_cast<int>(meta->data[1]);
    ProjectionSet set = ProjectionSet::identity(k, channels);
    for (int m = 0; m < k; ++m) {
        const TensorRecord* rec = find_record(records, "proj." + std::to_string(m));
        if (!rec) raise_data("projection file missing tensor 'proj." + std::to_string(m) + "': " + path.string());
        if (rec->dims != set.mats[static_cast<std::size_t>(m)].dims)
            raise_data("projection tensor 'proj." + std::to_string(m) + "' has mismatched shape in " + path.string());
        set.mats[static_cast<std::size_t>(m)].value = rec->data;
    }
    return set;
}

} // namespace covdet
