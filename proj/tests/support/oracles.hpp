#pragma once

// Brute-force reference implementations used as independent test oracles.
// Everything here is written as directly as possible from the defining
// formulas, with no shared code paths with the library.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace testing_support {

// Direct-sum strided cross-correlation conv with symmetric-ish zero padding:
// y[co][t] = bias[co] + sum_{ci,k} w[co][ci][k] * x[ci][stride*t + k - (k_size-1)/2].
inline std::vector<std::vector<double>> brute_conv1d(const std::vector<std::vector<double>>& x,
                                                     const std::vector<std::vector<std::vector<double>>>& w,
                                                     const std::vector<double>& bias, int stride) {
    const int c_out = static_cast<int>(w.size());
    const int c_in = static_cast<int>(w[0].size());
    const int k = static_cast<int>(w[0][0].size());
    const int n = static_cast<int>(x[0].size());
    const int n_out = (n - 1) / stride + 1;
    const int pad = (k - 1) / 2;
    std::vector<std::vector<double>> y(c_out, std::vector<double>(n_out, 0.0));
    for (int co = 0; co < c_out; ++co)
        for (int t = 0; t < n_out; ++t) {
            double acc = bias[co];
            for (int ci = 0; ci < c_in; ++ci)
                for (int kk = 0; kk < k; ++kk) {
                    const int src = stride * t + kk - pad;
                    if (src >= 0 && src < n) acc += w[co][ci][kk] * x[ci][src];
                }
            y[co][t] = acc;
        }
    return y;
}

// Scatter-add transposed conv: y[co][stride*t + k - pad] += w[ci][co][k]*x[ci][t].
inline std::vector<std::vector<double>> brute_conv1d_transposed(const std::vector<std::vector<double>>& x,
                                                                const std::vector<std::vector<std::vector<double>>>& w,
                                                                const std::vector<double>& bias, int stride,
                                                                int target_length) {
    const int c_in = static_cast<int>(w.size());
    const int c_out = static_cast<int>(w[0].size());
    const int k = static_cast<int>(w[0][0].size());
    const int n_in = static_cast<int>(x[0].size());
    const int pad = (k - 1) / 2;
    std::vector<std::vector<double>> y(c_out, std::vector<double>(target_length, 0.0));
    for (int co = 0; co < c_out; ++co)
        for (int t = 0; t < target_length; ++t) y[co][t] = bias[co];
    for (int ci = 0; ci < c_in; ++ci)
        for (int co = 0; co < c_out; ++co)
            for (int kk = 0; kk < k; ++kk)
                for (int t = 0; t < n_in; ++t) {
                    const int dst = stride * t + kk - pad;
                    if (dst >= 0 && dst < target_length) y[co][dst] += w[ci][co][kk] * x[ci][t];
                }
    return y;
}

// Reference Adam with bias correction, coded independently.
struct RefAdamState {
    std::vector<double> m, v;
    long t = 0;
};

inline void ref_adam_step(std::vector<double>& p, const std::vector<double>& g, RefAdamState& st, double lr,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (st.m.empty()) {
        st.m.assign(p.size(), 0.0);
        st.v.assign(p.size(), 0.0);
    }
    st.t += 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
        st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = st.m[i] / (1.0 - std::pow(beta1, st.t));
        const double vhat = st.v[i] / (1.0 - std::pow(beta2, st.t));
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

// Double-loop lag covariance with per-channel centering, 1/N normalization and
// zero contribution outside [0, N); averaged over channels.
inline std::vector<double> brute_cross_covariance(const std::vector<std::vector<double>>& a,
                                                  const std::vector<std::vector<double>>& b, int max_lag) {
    const int c = static_cast<int>(a.size());
    const int n = static_cast<int>(a[0].size());
    std::vector<double> profile(2 * max_lag + 1, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        double ma = 0.0, mb = 0.0;
        for (int t = 0; t < n; ++t) {
            ma += a[ci][t];
            mb += b[ci][t];
        }
        ma /= n;
        mb /= n;
        for (int lag = -max_lag; lag <= max_lag; ++lag) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) {
                const int u = t + lag;
                if (u >= 0 && u < n) acc += (a[ci][t] - ma) * (b[ci][u] - mb);
            }
            profile[lag + max_lag] += acc / n;
        }
    }
    for (double& v : profile) v /= c;
    return profile;
}

// Pair-counting ROC-AUC: fraction of (event, noise) pairs ranked correctly,
// ties counted one half.
inline double brute_roc_auc(const std::vector<double>& scores, const std::vector<int>& is_event) {
    double num = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!is_event[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (is_event[j]) continue;
            pairs += 1;
            if (scores[i] > scores[j])
                num += 1.0;
            else if (scores[i] == scores[j])
                num += 0.5;
        }
    }
    return num / static_cast<double>(pairs);
}

// Naive DFT for validating the FFT used in noise synthesis.
inline std::vector<std::complex<double>> brute_dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

} // namespace testing_support
