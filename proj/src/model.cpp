#include "covdet/model.hpp"

#include <cmath>

#include "covdet/checkpoint.hpp"
#include "covdet/rng.hpp"

namespace covdet {

void ArchitectureConfig::validate() const {
    require(n_down >= 1 && base_channels >= 1 && residual_per_stage >= 0, ErrorKind::usage,
            "architecture: n_down and base_channels must be positive");
    require(kernel_down >= 1 && kernel_res >= 1, ErrorKind::usage, "architecture: kernels must be positive");
    require(latent_length() >= 8, ErrorKind::usage,
            "architecture: latent length " + std::to_string(latent_length()) +
                " too short for lag analysis (need >= 8); lower n_down");
}

namespace {

template <class R>
void init_conv_weights(std::vector<R>& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / fan_in);
    for (auto& v : w) v = static_cast<R>(rng.uniform(-bound, bound));
}

} // namespace

template <class R>
AutoencoderModel<R> build_model(const ArchitectureConfig& arch, std::uint64_t seed) {
    arch.validate();
    AutoencoderModel<R> m;
    m.arch = arch;

    m.stage_lengths.push_back(kWindowSamples);
    for (int i = 0; i < arch.n_down; ++i) m.stage_lengths.push_back((m.stage_lengths.back() + 1) / 2);

    Rng rng(substream(seed, "model_init"));
    int c_prev = kChannels;
    for (int i = 0; i < arch.n_down; ++i) {
        const int c = arch.stage_channels(i);
        EncoderStage<R> stage;
        stage.down = Conv1d<R>("enc" + std::to_string(i) + ".down", c_prev, c, arch.kernel_down, 2);
        init_conv_weights(stage.down.w.value, c_prev * arch.kernel_down, rng);
        for (int r = 0; r < arch.residual_per_stage; ++r) {
            ResidualBlock<R> block;
            const std::string base = "enc" + std::to_string(i) + ".res" + std::to_string(r);
            block.conv1 = Conv1d<R>(base + ".conv1", c, c, arch.kernel_res, 1);
            block.conv2 = Conv1d<R>(base + ".conv2", c, c, arch.kernel_res, 1);
            init_conv_weights(block.conv1.w.value, c * arch.kernel_res, rng);
            init_conv_weights(block.conv2.w.value, c * arch.kernel_res, rng);
            stage.res.push_back(std::move(block));
        }
        m.stages.push_back(std::move(stage));
        c_prev = c;
    }
    for (int i = arch.n_down - 1; i >= 0; --i) {
        const int c_in = arch.stage_channels(i);
        const int c_out = i == 0 ? kChannels : arch.stage_channels(i - 1);
        ConvTranspose1d<R> up("dec" + std::to_string(arch.n_down - 1 - i) + ".up", c_in, c_out, arch.kernel_down, 2);
        init_conv_weights(up.w.value, c_in * arch.kernel_down, rng);
        m.ups.push_back(std::move(up));
    }
    return m;
}

template <class R>
std::vector<ParamTensor<R>*> AutoencoderModel<R>::parameters() {
    std::vector<ParamTensor<R>*> out;
    for (auto& stage : stages) {
        out.push_back(&stage.down.w);
        out.push_back(&stage.down.bias);
        for (auto& block : stage.res) {
            out.push_back(&block.conv1.w);
            out.push_back(&block.conv1.bias);
            out.push_back(&block.conv2.w);
            out.push_back(&block.conv2.bias);
        }
    }
    for (auto& up : ups) {
        out.push_back(&up.w);
        out.push_back(&up.bias);
    }
    return out;
}

template <class R>
std::size_t AutoencoderModel<R>::parameter_count() const {
    std::size_t total = 0;
    auto& self = const_cast<AutoencoderModel<R>&>(*this);
    for (auto* p : self.parameters()) total += p->size();
    return total;
}

template <class R>
Tensor3<R> AutoencoderModel<R>::encode(const Tensor3<R>& batch) const {
    require(batch.c == kChannels && batch.n == kWindowSamples, ErrorKind::data,
            "encode: expected batch shaped (B," + std::to_string(kChannels) + "," + std::to_string(kWindowSamples) +
                "), got " + batch.shape_str());
    Tensor3<R> x = batch;
    for (const auto& stage : stages) {
        x = relu(stage.down.forward(x));
        for (const auto& block : stage.res) {
            Tensor3<R> a1 = relu(block.conv1.forward(x));
            Tensor3<R> s = block.conv2.forward(a1);
            for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += x.v[i];
            x = relu(s);
        }
    }
    return x;
}

template <class R>
Tensor3<R> AutoencoderModel<R>::decode(const Tensor3<R>& latent) const {
    require(latent.c == arch.latent_channels() && latent.n == arch.latent_length(), ErrorKind::data,
            "decode: expected latent shaped (B," + std::to_string(arch.latent_channels()) + "," +
                std::to_string(arch.latent_length()) + "), got " + latent.shape_str());
    Tensor3<R> x = latent;
    for (std::size_t j = 0; j < ups.size(); ++j) {
        const int target = stage_lengths[ups.size() - 1 - j];
        x = ups[j].forward(x, target);
        if (j + 1 < ups.size()) x = relu(x);
    }
    return x;
}

template <class R>
Tensor3<R> AutoencoderModel<R>::forward_train(const Tensor3<R>& batch, ModelTrace<R>& trace) {
    require(batch.c == kChannels && batch.n == kWindowSamples, ErrorKind::data,
            "forward: expected batch shaped (B,3," + std::to_string(kWindowSamples) + "), got " + batch.shape_str());
    trace.enc.clear();
    trace.dec_in.clear();
    trace.dec_pre.clear();

    Tensor3<R> x = batch;
    for (auto& stage : stages) {
        typename ModelTrace<R>::StageTrace st;
        st.in = x;
        st.pre = stage.down.forward(x);
        x = relu(st.pre);
        for (auto& block : stage.res) {
            typename ModelTrace<R>::ResTrace rt;
            rt.in = x;
            rt.c1 = block.conv1.forward(x);
            rt.a1 = relu(rt.c1);
            rt.s = block.conv2.forward(rt.a1);
            for (std::size_t i = 0; i < rt.s.v.size(); ++i) rt.s.v[i] += x.v[i];
            x = relu(rt.s);
            st.res.push_back(std::move(rt));
        }
        trace.enc.push_back(std::move(st));
    }
    for (std::size_t j = 0; j < ups.size(); ++j) {
        trace.dec_in.push_back(x);
        const int target = stage_lengths[ups.size() - 1 - j];
        Tensor3<R> pre = ups[j].forward(x, target);
        x = j + 1 < ups.size() ? relu(pre) : pre;
        trace.dec_pre.push_back(std::move(pre));
    }
    return x;
}

template <class R>
Tensor3<R> AutoencoderModel<R>::backward(const Tensor3<R>& d_out, ModelTrace<R>& trace) {
    Tensor3<R> d = d_out;
    for (std::size_t jr = ups.size(); jr-- > 0;) {
        if (jr + 1 < ups.size()) d = relu_backward(d, trace.dec_pre[jr]);
        d = ups[jr].backward(d, trace.dec_in[jr]);
    }
    for (std::size_t ir = stages.size(); ir-- > 0;) {
        auto& stage = stages[ir];
        auto& st = trace.enc[ir];
        for (std::size_t rr = stage.res.size(); rr-- > 0;) {
            auto& block = stage.res[rr];
            auto& rt = st.res[rr];
            Tensor3<R> ds = relu_backward(d, rt.s);
            Tensor3<R> da1 = block.conv2.backward(ds, rt.a1);
            Tensor3<R> dc1 = relu_backward(da1, rt.c1);
            d = block.conv1.backward(dc1, rt.in);
            for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] += ds.v[i]; // skip connection
        }
        d = relu_backward(d, st.pre);
        d = stage.down.backward(d, st.in);
    }
    return d;
}

template <class R>
template <class S>
AutoencoderModel<S> AutoencoderModel<R>::cast() const {
    AutoencoderModel<S> out;
    out.arch = arch;
    out.stage_lengths = stage_lengths;
    for (const auto& stage : stages) {
        EncoderStage<S> st;
        st.down.c_in = stage.down.c_in;
        st.down.c_out = stage.down.c_out;
        st.down.k = stage.down.k;
        st.down.stride = stage.down.stride;
        st.down.w = stage.down.w.template cast<S>();
        st.down.bias = stage.down.bias.template cast<S>();
        for (const auto& block : stage.res) {
            ResidualBlock<S> b;
            b.conv1.c_in = block.conv1.c_in;
            b.conv1.c_out = block.conv1.c_out;
            b.conv1.k = block.conv1.k;
            b.conv1.stride = block.conv1.stride;
            b.conv1.w = block.conv1.w.template cast<S>();
            b.conv1.bias = block.conv1.bias.template cast<S>();
            b.conv2.c_in = block.conv2.c_in;
            b.conv2.c_out = block.conv2.c_out;
            b.conv2.k = block.conv2.k;
            b.conv2.stride = block.conv2.stride;
            b.conv2.w = block.conv2.w.template cast<S>();
            b.conv2.bias = block.conv2.bias.template cast<S>();
            st.res.push_back(std::move(b));
        }
        out.stages.push_back(std::move(st));
    }
    for (const auto& up : ups) {
        ConvTranspose1d<S> u;
        u.c_in = up.c_in;
        u.c_out = up.c_out;
        u.k = up.k;
        u.stride = up.stride;
        u.w = up.w.template cast<S>();
        u.bias = up.bias.template cast<S>();
        out.ups.push_back(std::move(u));
    }
    return out;
}

template <class R>
double reconstruction_loss(const Tensor3<R>& x, const Tensor3<R>& y) {
    require(x.same_shape(y), ErrorKind::data,
            "reconstruction_loss: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    require(x.b > 0, ErrorKind::data, "reconstruction_loss: empty batch");
    double total = 0.0;
    for (int bi = 0; bi < x.b; ++bi) {
        double acc = 0.0;
        for (int ci = 0; ci < x.c; ++ci) {
            const R* xr = x.row(bi, ci);
            const R* yr = y.row(bi, ci);
            double mx = 0.0, my = 0.0;
            for (int t = 0; t < x.n; ++t) {
                mx += xr[t];
                my += yr[t];
            }
            mx /= x.n;
            my /= x.n;
            for (int t = 0; t < x.n; ++t) {
                const double d = (xr[t] - mx) - (yr[t] - my);
                acc += d * d;
            }
        }
        total += std::sqrt(acc / (static_cast<double>(x.c) * x.n));
    }
    return total / x.b;
}

template <class R>
double reconstruction_loss_backward(const Tensor3<R>& x, const Tensor3<R>& y, Tensor3<R>& dy) {
    require(x.same_shape(y), ErrorKind::data,
            "reconstruction_loss: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    dy = Tensor3<R>(y.b, y.c, y.n);
    double total = 0.0;
    const double cn = static_cast<double>(x.c) * x.n;
    std::vector<double> diff(static_cast<std::size_t>(x.c) * x.n);
    for (int bi = 0; bi < x.b; ++bi) {
        double acc = 0.0;
        for (int ci = 0; ci < x.c; ++ci) {
            const R* xr = x.row(bi, ci);
            const R* yr = y.row(bi, ci);
            double mx = 0.0, my = 0.0;
            for (int t = 0; t < x.n; ++t) {
                mx += xr[t];
                my += yr[t];
            }
            mx /= x.n;
            my /= x.n;
            double* dr = diff.data() + static_cast<std::size_t>(ci) * x.n;
            for (int t = 0; t < x.n; ++t) {
                dr[t] = (xr[t] - mx) - (yr[t] - my);
                acc += dr[t] * dr[t];
            }
        }
        const double l = std::sqrt(acc / cn);
        total += l;
        // d/dy of sqrt(mean diff^2) is -(diff)/(CN * L); the centering
        // projector drops out because diff already has zero per-channel mean.
        const double scale = -1.0 / (cn * std::max(l, 1e-12) * x.b);
        for (int ci = 0; ci < x.c; ++ci) {
            const double* dr = diff.data() + static_cast<std::size_t>(ci) * x.n;
            R* out = dy.row(bi, ci);
            for (int t = 0; t < x.n; ++t) out[t] = static_cast<R>(dr[t] * scale);
        }
    }
    return total / x.b;
}

namespace {

constexpr const char* kArchRecord = "arch";

std::vector<TensorRecord> model_records(const AutoencoderModel<float>& model, const LatentMoments& stats) {
    std::vector<TensorRecord> records;
    records.push_back({kArchRecord,
                       {6},
                       {static_cast<float>(model.arch.n_down), static_cast<float>(model.arch.base_channels),
                        static_cast<float>(model.arch.kernel_down), static_cast<float>(model.arch.residual_per_stage),
                        static_cast<float>(model.arch.kernel_res), static_cast<float>(kChannels)}});
    auto& self = const_cast<AutoencoderModel<float>&>(model);
    for (auto* p : self.parameters()) records.push_back({p->name, p->dims, p->value});
    if (!stats.empty()) {
        records.push_back({"latent_stats.mean", {static_cast<std::uint32_t>(stats.mean.size())}, stats.mean});
        records.push_back({"latent_stats.var", {static_cast<std::uint32_t>(stats.var.size())}, stats.var});
    }
    return records;
}

} // namespace

void save_model(const std::filesystem::path& path, const AutoencoderModel<float>& model, const LatentMoments& stats) {
    write_checkpoint(path, model_records(model, stats));
}

AutoencoderModel<float> load_model(const std::filesystem::path& path, LatentMoments* latent_stats) {
    const auto records = read_checkpoint(path);
    const TensorRecord* arch_rec = find_record(records, kArchRecord);
    if (!arch_rec || arch_rec->data.size() != 6) raise_data("checkpoint missing 'arch' record: " + path.string());
    ArchitectureConfig arch;
    arch.n_down = static_cast<int>(arch_rec->data[0]);
    arch.base_channels = static_cast<int>(arch_rec->data[1]);
    arch.kernel_down = static_cast<int>(arch_rec->data[2]);
    arch.residual_per_stage = static_cast<int>(arch_rec->data[3]);
    arch.kernel_res = static_cast<int>(arch_rec->data[4]);

    AutoencoderModel<float> model = build_model<float>(arch, 0);
    for (auto* p : model.parameters()) {
        const TensorRecord* rec = find_record(records, p->name);
        if (!rec) raise_data("checkpoint missing tensor '" + p->name + "' in " + path.string());
        if (rec->dims != p->dims)
            raise_data("checkpoint tensor '" + p->name + "' has mismatched shape in " + path.string());
        p->value = rec->data;
    }
    if (latent_stats) {
        *latent_stats = {};
        const TensorRecord* mean = find_record(records, "latent_stats.mean");
        const TensorRecord* var = find_record(records, "latent_stats.var");
        if (mean && var) {
            latent_stats->mean = mean->data;
            latent_stats->var = var->data;
        }
    }
    return model;
}

template struct AutoencoderModel<float>;
template struct AutoencoderModel<double>;
template AutoencoderModel<float> build_model<float>(const ArchitectureConfig&, std::uint64_t);
template AutoencoderModel<double> build_model<double>(const ArchitectureConfig&, std::uint64_t);
template AutoencoderModel<double> AutoencoderModel<float>::cast<double>() const;
template AutoencoderModel<float> AutoencoderModel<double>::cast<float>() const;
template double reconstruction_loss(const Tensor3<float>&, const Tensor3<float>&);
template double reconstruction_loss(const Tensor3<double>&, const Tensor3<double>&);
template double reconstruction_loss_backward(const Tensor3<float>&, const Tensor3<float>&, Tensor3<float>&);
template double reconstruction_loss_backward(const Tensor3<double>&, const Tensor3<double>&, Tensor3<double>&);

} // namespace covdet
