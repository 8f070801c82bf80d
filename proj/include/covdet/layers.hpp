#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covdet/tensor.hpp"

namespace covdet {

// 1D cross-correlation convolution, "half" padding: out_len = ceil(n / stride).
// Weights are (c_out, c_in, k); pad_left = (k-1)/2, pad_right = k/2, zeros
// outside the window.
template <class R>
struct Conv1d {
    int c_in = 0, c_out = 0, k = 1, stride = 1;
    ParamTensor<R> w;    // (c_out, c_in, k)
    ParamTensor<R> bias; // (c_out)

    Conv1d() = default;
    Conv1d(std::string name, int c_in_, int c_out_, int k_, int stride_);

    int out_len(int n) const { return (n - 1) / stride + 1; }
    int pad_left() const { return (k - 1) / 2; }

    Tensor3<R> forward(const Tensor3<R>& x) const;
    // Accumulates into w.grad / bias.grad, returns grad w.r.t. x.
    Tensor3<R> backward(const Tensor3<R>& dy, const Tensor3<R>& x);
};

// Adjoint of the strided Conv1d above. Weights are (c_in, c_out, k).
// target_length must lie in [stride*(n_in-1)+1, stride*n_in], i.e. the set of
// input lengths the forward conv maps to n_in.
template <class R>
struct ConvTranspose1d {
    int c_in = 0, c_out = 0, k = 1, stride = 1;
    ParamTensor<R> w;    // (c_in, c_out, k)
    ParamTensor<R> bias; // (c_out)

    ConvTranspose1d() = default;
    ConvTranspose1d(std::string name, int c_in_, int c_out_, int k_, int stride_);

    int pad_left() const { return (k - 1) / 2; }
    void check_target(int n_in, int target_length) const;

    Tensor3<R> forward(const Tensor3<R>& x, int target_length) const;
    Tensor3<R> backward(const Tensor3<R>& dy, const Tensor3<R>& x);
};

template <class R>
Tensor3<R> relu(const Tensor3<R>& x);

// Gradient mask: passes dy where the saved input was > 0.
template <class R>
Tensor3<R> relu_backward(const Tensor3<R>& dy, const Tensor3<R>& x);

// Per-channel batch normalization over the (batch, time) axes.
template <class R>
struct BatchNorm1d {
    int channels = 0;
    R eps = static_cast<R>(1e-5);
    R momentum = static_cast<R>(0.9); // running = momentum*running + (1-momentum)*batch
    ParamTensor<R> gamma, beta;
    std::vector<R> running_mean, running_var;

    struct Cache {
        Tensor3<R> xhat;
        std::vector<R> inv_std;
    };

    BatchNorm1d() = default;
    explicit BatchNorm1d(std::string name, int channels_);

    // Normalizes with batch statistics and updates running stats.
    Tensor3<R> forward_train(const Tensor3<R>& x, Cache& cache);
    Tensor3<R> forward_infer(const Tensor3<R>& x) const;
    Tensor3<R> backward(const Tensor3<R>& dy, const Cache& cache);
};

} // namespace covdet
