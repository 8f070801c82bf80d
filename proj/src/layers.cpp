#include "covdet/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstring>

#include "covdet/parallel.hpp"

namespace covdet {

namespace {

template <class R>
using MatRM = Eigen::Matrix<R, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class R>
using MapRM = Eigen::Map<MatRM<R>>;
template <class R>
using CMapRM = Eigen::Map<const MatRM<R>>;

// Patch matrix (c*k rows, n_out cols, row-major): row (ci*k+kk) holds
// x[ci][stride*t + kk - pad] over t, zero outside [0, n).
template <class R>
void im2col(const R* x, int c, int n, int k, int stride, int pad, int n_out, R* col) {
    for (int ci = 0; ci < c; ++ci) {
        const R* xr = x + static_cast<std::size_t>(ci) * n;
        for (int kk = 0; kk < k; ++kk) {
            R* dst = col + (static_cast<std::size_t>(ci) * k + kk) * n_out;
            const int off = kk - pad;
            if (stride == 1) {
                const int t0 = std::max(0, -off);
                const int t1 = std::min(n_out, n - off);
                if (t0 > 0) std::fill(dst, dst + t0, R(0));
                if (t1 > t0) std::memcpy(dst + t0, xr + t0 + off, static_cast<std::size_t>(t1 - t0) * sizeof(R));
                if (t1 < n_out) std::fill(dst + std::max(t0, t1), dst + n_out, R(0));
            } else {
                for (int t = 0; t < n_out; ++t) {
                    const int src = stride * t + off;
                    dst[t] = (src >= 0 && src < n) ? xr[src] : R(0);
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds col rows back into x.
template <class R>
void col2im_add(const R* col, int c, int n, int k, int stride, int pad, int n_out, R* x) {
    for (int ci = 0; ci < c; ++ci) {
        R* xr = x + static_cast<std::size_t>(ci) * n;
        for (int kk = 0; kk < k; ++kk) {
            const R* src = col + (static_cast<std::size_t>(ci) * k + kk) * n_out;
            const int off = kk - pad;
            if (stride == 1) {
                const int t0 = std::max(0, -off);
                const int t1 = std::min(n_out, n - off);
                for (int t = t0; t < t1; ++t) xr[t + off] += src[t];
            } else {
                for (int t = 0; t < n_out; ++t) {
                    const int dst = stride * t + off;
                    if (dst >= 0 && dst < n) xr[dst] += src[t];
                }
            }
        }
    }
}

template <class R>
void init_zero(ParamTensor<R>& p) {
    std::fill(p.value.begin(), p.value.end(), R(0));
}

} // namespace

template <class R>
Conv1d<R>::Conv1d(std::string name, int c_in_, int c_out_, int k_, int stride_)
    : c_in(c_in_), c_out(c_out_), k(k_), stride(stride_),
      w(name + ".w", {static_cast<std::uint32_t>(c_out_), static_cast<std::uint32_t>(c_in_), static_cast<std::uint32_t>(k_)}),
      bias(name + ".b", {static_cast<std::uint32_t>(c_out_)}) {
    require(c_in_ > 0 && c_out_ > 0 && k_ > 0 && stride_ > 0, ErrorKind::usage, "conv1d: invalid geometry");
    init_zero(bias);
}

template <class R>
Tensor3<R> Conv1d<R>::forward(const Tensor3<R>& x) const {
    require(x.c == c_in, ErrorKind::data,
            "conv1d(" + w.name + "): channel axis mismatch: input has " + std::to_string(x.c) +
                ", layer expects " + std::to_string(c_in));
    const int n_out = out_len(x.n);
    Tensor3<R> y(x.b, c_out, n_out);
    const int ck = c_in * k;
    const int pad = pad_left();

    parallel_ranges(static_cast<std::size_t>(x.b), kBatchBlocks, [&](int, std::size_t b0, std::size_t b1) {
        std::vector<R> col(static_cast<std::size_t>(ck) * n_out);
        CMapRM<R> wm(w.value.data(), c_out, ck);
        for (std::size_t bi = b0; bi < b1; ++bi) {
            im2col(x.row(static_cast<int>(bi), 0), c_in, x.n, k, stride, pad, n_out, col.data());
            CMapRM<R> cm(col.data(), ck, n_out);
            MapRM<R> ym(y.row(static_cast<int>(bi), 0), c_out, n_out);
            ym.noalias() = wm * cm;
            for (int co = 0; co < c_out; ++co) ym.row(co).array() += bias.value[static_cast<std::size_t>(co)];
        }
    });
    return y;
}

template <class R>
Tensor3<R> Conv1d<R>::backward(const Tensor3<R>& dy, const Tensor3<R>& x) {
    const int n_out = out_len(x.n);
    require(dy.b == x.b && dy.c == c_out && dy.n == n_out, ErrorKind::data,
            "conv1d(" + w.name + "): output grad shape " + dy.shape_str() + " does not match forward output");
    Tensor3<R> dx(x.b, c_in, x.n);
    const int ck = c_in * k;
    const int pad = pad_left();

    const int n_blocks = std::min<int>(kBatchBlocks, std::max(1, x.b));
    std::vector<std::vector<R>> wg(static_cast<std::size_t>(n_blocks)), bg(static_cast<std::size_t>(n_blocks));

    parallel_ranges(static_cast<std::size_t>(x.b), n_blocks, [&](int block, std::size_t b0, std::size_t b1) {
        auto& wgb = wg[static_cast<std::size_t>(block)];
        auto& bgb = bg[static_cast<std::size_t>(block)];
        wgb.assign(w.size(), R(0));
        bgb.assign(bias.size(), R(0));
        std::vector<R> col(static_cast<std::size_t>(ck) * n_out);
        std::vector<R> dcol(static_cast<std::size_t>(ck) * n_out);
        CMapRM<R> wm(w.value.data(), c_out, ck);
        MapRM<R> wgm(wgb.data(), c_out, ck);
        for (std::size_t bi = b0; bi < b1; ++bi) {
            im2col(x.row(static_cast<int>(bi), 0), c_in, x.n, k, stride, pad, n_out, col.data());
            CMapRM<R> cm(col.data(), ck, n_out);
            CMapRM<R> dym(dy.row(static_cast<int>(bi), 0), c_out, n_out);
            wgm.noalias() += dym * cm.transpose();
            for (int co = 0; co < c_out; ++co) bgb[static_cast<std::size_t>(co)] += dym.row(co).sum();
            MapRM<R> dcm(dcol.data(), ck, n_out);
            dcm.noalias() = wm.transpose() * dym;
            col2im_add(dcol.data(), c_in, x.n, k, stride, pad, n_out, dx.row(static_cast<int>(bi), 0));
        }
    });
    // Block-ordered reduction keeps grads identical for any thread count.
    for (int block = 0; block < n_blocks; ++block) {
        for (std::size_t i = 0; i < w.size(); ++i) w.grad[i] += wg[static_cast<std::size_t>(block)][i];
        for (std::size_t i = 0; i < bias.size(); ++i) bias.grad[i] += bg[static_cast<std::size_t>(block)][i];
    }
    return dx;
}

template <class R>
ConvTranspose1d<R>::ConvTranspose1d(std::string name, int c_in_, int c_out_, int k_, int stride_)
    : c_in(c_in_), c_out(c_out_), k(k_), stride(stride_),
      w(name + ".w", {static_cast<std::uint32_t>(c_in_), static_cast<std::uint32_t>(c_out_), static_cast<std::uint32_t>(k_)}),
      bias(name + ".b", {static_cast<std::uint32_t>(c_out_)}) {
    require(c_in_ > 0 && c_out_ > 0 && k_ > 0 && stride_ > 0, ErrorKind::usage, "conv1d_transposed: invalid geometry");
    init_zero(bias);
}

template <class R>
void ConvTranspose1d<R>::check_target(int n_in, int target_length) const {
    const int lo = stride * (n_in - 1) + 1;
    const int hi = stride * n_in;
    require(target_length >= lo && target_length <= hi, ErrorKind::data,
            "conv1d_transposed(" + w.name + "): target_length " + std::to_string(target_length) +
                " outside reachable range [" + std::to_string(lo) + "," + std::to_string(hi) + "] for input length " +
                std::to_string(n_in));
}

template <class R>
Tensor3<R> ConvTranspose1d<R>::forward(const Tensor3<R>& x, int target_length) const {
    require(x.c == c_in, ErrorKind::data,
            "conv1d_transposed(" + w.name + "): channel axis mismatch: input has " + std::to_string(x.c) +
                ", layer expects " + std::to_string(c_in));
    check_target(x.n, target_length);
    Tensor3<R> y(x.b, c_out, target_length);
    const int ok = c_out * k;
    const int pad = pad_left();

    parallel_ranges(static_cast<std::size_t>(x.b), kBatchBlocks, [&](int, std::size_t b0, std::size_t b1) {
        std::vector<R> u(static_cast<std::size_t>(ok) * x.n);
        CMapRM<R> wm(w.value.data(), c_in, ok);
        for (std::size_t bi = b0; bi < b1; ++bi) {
            CMapRM<R> xm(x.row(static_cast<int>(bi), 0), c_in, x.n);
            MapRM<R> um(u.data(), ok, x.n);
            um.noalias() = wm.transpose() * xm;
            R* yr = y.row(static_cast<int>(bi), 0);
            col2im_add(u.data(), c_out, target_length, k, stride, pad, x.n, yr);
            for (int co = 0; co < c_out; ++co) {
                R* row = yr + static_cast<std::size_t>(co) * target_length;
                for (int t = 0; t < target_length; ++t) row[t] += bias.value[static_cast<std::size_t>(co)];
            }
        }
    });
    return y;
}

template <class R>
Tensor3<R> ConvTranspose1d<R>::backward(const Tensor3<R>& dy, const Tensor3<R>& x) {
    require(dy.b == x.b && dy.c == c_out, ErrorKind::data,
            "conv1d_transposed(" + w.name + "): output grad shape " + dy.shape_str() + " does not match forward output");
    check_target(x.n, dy.n);
    Tensor3<R> dx(x.b, c_in, x.n);
    const int ok = c_out * k;
    const int pad = pad_left();

    const int n_blocks = std::min<int>(kBatchBlocks, std::max(1, x.b));
    std::vector<std::vector<R>> wg(static_cast<std::size_t>(n_blocks)), bg(static_cast<std::size_t>(n_blocks));

    parallel_ranges(static_cast<std::size_t>(x.b), n_blocks, [&](int block, std::size_t b0, std::size_t b1) {
        auto& wgb = wg[static_cast<std::size_t>(block)];
        auto& bgb = bg[static_cast<std::size_t>(block)];
        wgb.assign(w.size(), R(0));
        bgb.assign(bias.size(), R(0));
        std::vector<R> du(static_cast<std::size_t>(ok) * x.n);
        CMapRM<R> wm(w.value.data(), c_in, ok);
        MapRM<R> wgm(wgb.data(), c_in, ok);
        for (std::size_t bi = b0; bi < b1; ++bi) {
            // dU is the im2col gather of dy under the forward's scatter geometry.
            im2col(dy.row(static_cast<int>(bi), 0), c_out, dy.n, k, stride, pad, x.n, du.data());
            CMapRM<R> dum(du.data(), ok, x.n);
            CMapRM<R> xm(x.row(static_cast<int>(bi), 0), c_in, x.n);
            MapRM<R> dxm(dx.row(static_cast<int>(bi), 0), c_in, x.n);
            dxm.noalias() = wm * dum;
            wgm.noalias() += xm * dum.transpose();
            const R* dyr = dy.row(static_cast<int>(bi), 0);
            for (int co = 0; co < c_out; ++co) {
                const R* row = dyr + static_cast<std::size_t>(co) * dy.n;
                R s = R(0);
                for (int t = 0; t < dy.n; ++t) s += row[t];
                bgb[static_cast<std::size_t>(co)] += s;
            }
        }
    });
    for (int block = 0; block < n_blocks; ++block) {
        for (std::size_t i = 0; i < w.size(); ++i) w.grad[i] += wg[static_cast<std::size_t>(block)][i];
        for (std::size_t i = 0; i < bias.size(); ++i) bias.grad[i] += bg[static_cast<std::size_t>(block)][i];
    }
    return dx;
}

template <class R>
Tensor3<R> relu(const Tensor3<R>& x) {
    Tensor3<R> y(x.b, x.c, x.n);
    for (std::size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > R(0) ? x.v[i] : R(0);
    return y;
}

template <class R>
Tensor3<R> relu_backward(const Tensor3<R>& dy, const Tensor3<R>& x) {
    require(dy.same_shape(x), ErrorKind::data, "relu_backward: shape mismatch");
    Tensor3<R> dx(x.b, x.c, x.n);
    for (std::size_t i = 0; i < x.v.size(); ++i) dx.v[i] = x.v[i] > R(0) ? dy.v[i] : R(0);
    return dx;
}

template <class R>
BatchNorm1d<R>::BatchNorm1d(std::string name, int channels_)
    : channels(channels_),
      gamma(name + ".gamma", {static_cast<std::uint32_t>(channels_)}),
      beta(name + ".beta", {static_cast<std::uint32_t>(channels_)}),
      running_mean(static_cast<std::size_t>(channels_), R(0)),
      running_var(static_cast<std::size_t>(channels_), R(1)) {
    std::fill(gamma.value.begin(), gamma.value.end(), R(1));
    init_zero(beta);
}

template <class R>
Tensor3<R> BatchNorm1d<R>::forward_train(const Tensor3<R>& x, Cache& cache) {
    require(x.b > 0, ErrorKind::data, "batch_norm: zero-size batch");
    require(x.c == channels, ErrorKind::data, "batch_norm: channel axis mismatch");
    const std::size_t count = static_cast<std::size_t>(x.b) * x.n;
    Tensor3<R> y(x.b, x.c, x.n);
    cache.xhat = Tensor3<R>(x.b, x.c, x.n);
    cache.inv_std.assign(static_cast<std::size_t>(channels), R(0));

    for (int ci = 0; ci < channels; ++ci) {
        double sum = 0.0, sum2 = 0.0;
        for (int bi = 0; bi < x.b; ++bi) {
            const R* row = x.row(bi, ci);
            for (int t = 0; t < x.n; ++t) {
                sum += row[t];
                sum2 += static_cast<double>(row[t]) * row[t];
            }
        }
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(0.0, sum2 / static_cast<double>(count) - mean * mean);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        cache.inv_std[static_cast<std::size_t>(ci)] = static_cast<R>(inv);

        const R g = gamma.value[static_cast<std::size_t>(ci)];
        const R be = beta.value[static_cast<std::size_t>(ci)];
        for (int bi = 0; bi < x.b; ++bi) {
            const R* row = x.row(bi, ci);
            R* xh = cache.xhat.row(bi, ci);
            R* yr = y.row(bi, ci);
            for (int t = 0; t < x.n; ++t) {
                const R h = static_cast<R>((row[t] - mean) * inv);
                xh[t] = h;
                yr[t] = g * h + be;
            }
        }
        const double unbias = count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
        running_mean[static_cast<std::size_t>(ci)] =
            momentum * running_mean[static_cast<std::size_t>(ci)] + (R(1) - momentum) * static_cast<R>(mean);
        running_var[static_cast<std::size_t>(ci)] =
            momentum * running_var[static_cast<std::size_t>(ci)] + (R(1) - momentum) * static_cast<R>(var * unbias);
    }
    return y;
}

template <class R>
Tensor3<R> BatchNorm1d<R>::forward_infer(const Tensor3<R>& x) const {
    require(x.b > 0, ErrorKind::data, "batch_norm: zero-size batch");
    require(x.c == channels, ErrorKind::data, "batch_norm: channel axis mismatch");
    Tensor3<R> y(x.b, x.c, x.n);
    for (int ci = 0; ci < channels; ++ci) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[static_cast<std::size_t>(ci)]) + static_cast<double>(eps));
        const double mean = running_mean[static_cast<std::size_t>(ci)];
        const R g = gamma.value[static_cast<std::size_t>(ci)];
        const R be = beta.value[static_cast<std::size_t>(ci)];
        for (int bi = 0; bi < x.b; ++bi) {
            const R* row = x.row(bi, ci);
            R* yr = y.row(bi, ci);
            for (int t = 0; t < x.n; ++t) yr[t] = static_cast<R>(g * (row[t] - mean) * inv + be);
        }
    }
    return y;
}

template <class R>
Tensor3<R> BatchNorm1d<R>::backward(const Tensor3<R>& dy, const Cache& cache) {
    const Tensor3<R>& xhat = cache.xhat;
    require(dy.same_shape(xhat), ErrorKind::data, "batch_norm backward: shape mismatch");
    const double count = static_cast<double>(xhat.b) * xhat.n;
    Tensor3<R> dx(xhat.b, xhat.c, xhat.n);

    for (int ci = 0; ci < channels; ++ci) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int bi = 0; bi < xhat.b; ++bi) {
            const R* dyr = dy.row(bi, ci);
            const R* xh = xhat.row(bi, ci);
            for (int t = 0; t < xhat.n; ++t) {
                sum_dy += dyr[t];
                sum_dy_xhat += static_cast<double>(dyr[t]) * xh[t];
            }
        }
        gamma.grad[static_cast<std::size_t>(ci)] += static_cast<R>(sum_dy_xhat);
        beta.grad[static_cast<std::size_t>(ci)] += static_cast<R>(sum_dy);

        const double g = gamma.value[static_cast<std::size_t>(ci)];
        const double inv = cache.inv_std[static_cast<std::size_t>(ci)];
        const double a = g * inv;
        for (int bi = 0; bi < xhat.b; ++bi) {
            const R* dyr = dy.row(bi, ci);
            const R* xh = xhat.row(bi, ci);
            R* dxr = dx.row(bi, ci);
            for (int t = 0; t < xhat.n; ++t) {
                dxr[t] = static_cast<R>(a * (dyr[t] - sum_dy / count - xh[t] * sum_dy_xhat / count));
            }
        }
    }
    return dx;
}

template struct Conv1d<float>;
template struct Conv1d<double>;
template struct ConvTranspose1d<float>;
template struct ConvTranspose1d<double>;
template struct BatchNorm1d<float>;
template struct BatchNorm1d<double>;
template Tensor3<float> relu(const Tensor3<float>&);
template Tensor3<double> relu(const Tensor3<double>&);
template Tensor3<float> relu_backward(const Tensor3<float>&, const Tensor3<float>&);
template Tensor3<double> relu_backward(const Tensor3<double>&, const Tensor3<double>&);

} // namespace covdet
