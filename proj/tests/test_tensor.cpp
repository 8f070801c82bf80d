#include <doctest.h>

#include <cmath>
#include <vector>

#include "covdet/layers.hpp"
#include "covdet/optimizer.hpp"
#include "covdet/rng.hpp"
#include "support/finite_diff.hpp"
#include "support/oracles.hpp"

using namespace covdet;
using namespace testing_support;

namespace {

template <class R>
Tensor3<R> random_tensor(Rng& rng, int b, int c, int n, double lo = -1.0, double hi = 1.0) {
    Tensor3<R> t(b, c, n);
    for (auto& v : t.v) v = static_cast<R>(rng.uniform(lo, hi));
    return t;
}

template <class R>
void randomize_param(Rng& rng, ParamTensor<R>& p, double scale = 0.5) {
    for (auto& v : p.value) v = static_cast<R>(rng.uniform(-scale, scale));
}

// Collects every coordinate of a layer gradient check: inputs, weights, bias.
template <class R>
struct LinearHead {
    std::vector<R> coeff;
    explicit LinearHead(Rng& rng, std::size_t n) {
        coeff.resize(n);
        for (auto& c : coeff) c = static_cast<R>(rng.uniform(-1.0, 1.0));
    }
    double value(const Tensor3<R>& y) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += static_cast<double>(coeff[i]) * y.v[i];
        return acc;
    }
    Tensor3<R> grad(const Tensor3<R>& y) const {
        Tensor3<R> dy(y.b, y.c, y.n);
        for (std::size_t i = 0; i < y.v.size(); ++i) dy.v[i] = coeff[i];
        return dy;
    }
};

template <class R>
std::vector<R*> all_coords(Tensor3<R>& x, ParamTensor<R>& w, ParamTensor<R>& b) {
    std::vector<R*> out;
    for (auto& v : x.v) out.push_back(&v);
    for (auto& v : w.value) out.push_back(&v);
    for (auto& v : b.value) out.push_back(&v);
    return out;
}

template <class R>
double conv_grad_check(std::uint64_t seed, bool transposed) {
    Rng rng(seed);
    const int b = 1 + static_cast<int>(rng.below(2));
    const int c_in = 1 + static_cast<int>(rng.below(4));
    const int c_out = 1 + static_cast<int>(rng.below(4));
    const int k = 1 + static_cast<int>(rng.below(5));
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int n = 4 + static_cast<int>(rng.below(13));
    const double eps = sizeof(R) == 4 ? 1e-2 : 1e-5;

    Tensor3<R> x = random_tensor<R>(rng, b, c_in, n);
    if (!transposed) {
        Conv1d<R> conv("t", c_in, c_out, k, stride);
        randomize_param(rng, conv.w);
        randomize_param(rng, conv.bias);
        LinearHead<R> head(rng, static_cast<std::size_t>(b) * c_out * conv.out_len(n));

        auto coords = all_coords(x, conv.w, conv.bias);
        auto numeric = finite_difference_gradient<R>([&] { return head.value(conv.forward(x)); }, coords, eps);

        Tensor3<R> y = conv.forward(x);
        Tensor3<R> dx = conv.backward(head.grad(y), x);
        std::vector<double> analytic;
        for (auto& v : dx.v) analytic.push_back(v);
        for (auto& g : conv.w.grad) analytic.push_back(g);
        for (auto& g : conv.bias.grad) analytic.push_back(g);
        return max_relative_error(analytic, numeric);
    }
    const int target = stride * (n - 1) + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(stride)));
    ConvTranspose1d<R> conv("t", c_in, c_out, k, stride);
    randomize_param(rng, conv.w);
    randomize_param(rng, conv.bias);
    LinearHead<R> head(rng, static_cast<std::size_t>(b) * c_out * target);

    auto coords = all_coords(x, conv.w, conv.bias);
    auto numeric = finite_difference_gradient<R>([&] { return head.value(conv.forward(x, target)); }, coords, eps);

    Tensor3<R> y = conv.forward(x, target);
    Tensor3<R> dx = conv.backward(head.grad(y), x);
    std::vector<double> analytic;
    for (auto& v : dx.v) analytic.push_back(v);
    for (auto& g : conv.w.grad) analytic.push_back(g);
    for (auto& g : conv.bias.grad) analytic.push_back(g);
    return max_relative_error(analytic, numeric);
}

template <class R>
double batchnorm_grad_check(std::uint64_t seed) {
    Rng rng(seed);
    const int b = 2 + static_cast<int>(rng.below(2));
    const int c = 1 + static_cast<int>(rng.below(4));
    const int n = 4 + static_cast<int>(rng.below(13));
    const double eps = sizeof(R) == 4 ? 1e-2 : 1e-5;

    Tensor3<R> x = random_tensor<R>(rng, b, c, n);
    BatchNorm1d<R> bn("t", c);
    randomize_param(rng, bn.gamma, 1.0);
    randomize_param(rng, bn.beta, 1.0);
    LinearHead<R> head(rng, x.v.size());

    std::vector<R*> coords;
    for (auto& v : x.v) coords.push_back(&v);
    for (auto& v : bn.gamma.value) coords.push_back(&v);
    for (auto& v : bn.beta.value) coords.push_back(&v);
    auto numeric = finite_difference_gradient<R>(
        [&] {
            BatchNorm1d<R> probe = bn; // keep running stats untouched between probes
            typename BatchNorm1d<R>::Cache cache;
            return head.value(probe.forward_train(x, cache));
        },
        coords, eps);

    typename BatchNorm1d<R>::Cache cache;
    BatchNorm1d<R> live = bn;
    Tensor3<R> y = live.forward_train(x, cache);
    Tensor3<R> dx = live.backward(head.grad(y), cache);
    std::vector<double> analytic;
    for (auto& v : dx.v) analytic.push_back(v);
    for (auto& g : live.gamma.grad) analytic.push_back(g);
    for (auto& g : live.beta.grad) analytic.push_back(g);
    return max_relative_error(analytic, numeric);
}

} // namespace

TEST_SUITE("tensor") {

TEST_CASE("conv1d identity kernel maps input to itself") {
    Conv1d<float> conv("t", 1, 1, 3, 1);
    conv.w.value = {0.f, 1.f, 0.f};
    Tensor3<float> x(1, 1, 4);
    x.v = {1.f, 2.f, 3.f, 4.f};
    auto y = conv.forward(x);
    REQUIRE(y.n == 4);
    for (int t = 0; t < 4; ++t) CHECK(y.at(0, 0, t) == doctest::Approx(x.at(0, 0, t)));
}

TEST_CASE("conv1d stride 2 halves 3000 to 1500") {
    Conv1d<float> conv("t", 3, 8, 7, 2);
    Tensor3<float> x(1, 3, 3000);
    CHECK(conv.forward(x).n == 1500);
    // odd lengths round up the same way down the whole stack
    CHECK(conv.out_len(375) == 188);
    CHECK(conv.out_len(1500) == 750);
}

TEST_CASE("conv1d box kernel with half padding matches hand/oracle values") {
    Conv1d<float> conv("t", 1, 1, 3, 1);
    conv.w.value = {1.f, 1.f, 1.f};
    Tensor3<float> x(1, 1, 4);
    x.v = {1.f, 1.f, 1.f, 1.f};
    auto y = conv.forward(x);
    const std::vector<float> expect = {2.f, 3.f, 3.f, 2.f};
    for (int t = 0; t < 4; ++t) CHECK(y.at(0, 0, t) == doctest::Approx(expect[static_cast<std::size_t>(t)]));

    auto oracle = brute_conv1d({{1, 1, 1, 1}}, {{{1, 1, 1}}}, {0.0}, 1);
    for (int t = 0; t < 4; ++t) CHECK(y.at(0, 0, t) == doctest::Approx(oracle[0][static_cast<std::size_t>(t)]));
}

TEST_CASE("conv1d matches brute-force oracle on random instances") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const int c_in = 1 + static_cast<int>(rng.below(4));
        const int c_out = 1 + static_cast<int>(rng.below(4));
        const int k = 1 + static_cast<int>(rng.below(7));
        const int stride = 1 + static_cast<int>(rng.below(3));
        const int n = 3 + static_cast<int>(rng.below(20));
        Conv1d<double> conv("t", c_in, c_out, k, stride);
        randomize_param(rng, conv.w);
        randomize_param(rng, conv.bias);
        Tensor3<double> x = random_tensor<double>(rng, 1, c_in, n);

        std::vector<std::vector<double>> xo(static_cast<std::size_t>(c_in));
        for (int ci = 0; ci < c_in; ++ci) xo[static_cast<std::size_t>(ci)].assign(x.row(0, ci), x.row(0, ci) + n);
        std::vector<std::vector<std::vector<double>>> wo(
            static_cast<std::size_t>(c_out),
            std::vector<std::vector<double>>(static_cast<std::size_t>(c_in), std::vector<double>(static_cast<std::size_t>(k))));
        for (int co = 0; co < c_out; ++co)
            for (int ci = 0; ci < c_in; ++ci)
                for (int kk = 0; kk < k; ++kk)
                    wo[co][ci][kk] = conv.w.value[static_cast<std::size_t>((co * c_in + ci) * k + kk)];
        std::vector<double> bo(conv.bias.value.begin(), conv.bias.value.end());

        auto y = conv.forward(x);
        auto oracle = brute_conv1d(xo, wo, bo, stride);
        REQUIRE(y.n == static_cast<int>(oracle[0].size()));
        for (int co = 0; co < c_out; ++co)
            for (int t = 0; t < y.n; ++t)
                CHECK(y.at(0, co, t) == doctest::Approx(oracle[static_cast<std::size_t>(co)][static_cast<std::size_t>(t)]).epsilon(1e-10));
    }
}

TEST_CASE("conv1d rejects channel mismatch with axis in message") {
    Conv1d<float> conv("t", 4, 2, 3, 1);
    Tensor3<float> x(1, 3, 8);
    CHECK_THROWS_WITH_AS(conv.forward(x), doctest::Contains("channel axis"), Error);
}

TEST_CASE("conv1d stride-1 interior translation equivariance is exact") {
    Rng rng(7);
    const int k = 5, n = 48, shift = 3;
    Conv1d<float> conv("t", 2, 3, k, 1);
    randomize_param(rng, conv.w);
    randomize_param(rng, conv.bias);
    Tensor3<float> x = random_tensor<float>(rng, 1, 2, n);
    Tensor3<float> xs(1, 2, n);
    for (int ci = 0; ci < 2; ++ci)
        for (int t = 0; t + shift < n; ++t) xs.at(0, ci, t + shift) = x.at(0, ci, t);
    auto y = conv.forward(x);
    auto ys = conv.forward(xs);
    for (int co = 0; co < 3; ++co)
        for (int t = k; t < n - k - shift; ++t)
            CHECK(ys.at(0, co, t + shift) == y.at(0, co, t)); // bitwise: same summands
}

TEST_CASE("conv1d_transposed length contract and spec example") {
    ConvTranspose1d<float> up("t", 1, 1, 2, 2);
    up.w.value = {1.f, 1.f};
    Tensor3<float> x(1, 1, 2);
    x.v = {1.f, 2.f};
    auto y = up.forward(x, 4);
    REQUIRE(y.n == 4);
    const std::vector<float> expect = {1.f, 1.f, 2.f, 2.f};
    for (int t = 0; t < 4; ++t) CHECK(y.at(0, 0, t) == doctest::Approx(expect[static_cast<std::size_t>(t)]));

    auto oracle = brute_conv1d_transposed({{1, 2}}, {{{1, 1}}}, {0.0}, 2, 4);
    for (int t = 0; t < 4; ++t) CHECK(y.at(0, 0, t) == doctest::Approx(oracle[0][static_cast<std::size_t>(t)]));

    ConvTranspose1d<float> up2("t", 1, 1, 7, 2);
    Tensor3<float> z(1, 1, 1500);
    CHECK(up2.forward(z, 3000).n == 3000);
    CHECK_THROWS_AS(up2.forward(z, 3001), Error);
    CHECK_THROWS_AS(up2.forward(z, 2998), Error);
}

TEST_CASE("conv1d_transposed delta kernel at stride 1 reproduces input") {
    ConvTranspose1d<float> up("t", 1, 1, 3, 1);
    up.w.value = {0.f, 1.f, 0.f};
    Rng rng(3);
    Tensor3<float> x = random_tensor<float>(rng, 2, 1, 9);
    auto y = up.forward(x, 9);
    for (int bi = 0; bi < 2; ++bi)
        for (int t = 0; t < 9; ++t) CHECK(y.at(bi, 0, t) == doctest::Approx(x.at(bi, 0, t)));
}

TEST_CASE("conv1d_transposed matches brute scatter-add oracle on random instances") {
    Rng rng(202);
    for (int trial = 0; trial < 50; ++trial) {
        const int c_in = 1 + static_cast<int>(rng.below(3));
        const int c_out = 1 + static_cast<int>(rng.below(3));
        const int k = 1 + static_cast<int>(rng.below(7));
        const int stride = 1 + static_cast<int>(rng.below(3));
        const int n = 2 + static_cast<int>(rng.below(10));
        const int target = stride * (n - 1) + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(stride)));
        ConvTranspose1d<double> up("t", c_in, c_out, k, stride);
        randomize_param(rng, up.w);
        randomize_param(rng, up.bias);
        Tensor3<double> x = random_tensor<double>(rng, 1, c_in, n);

        std::vector<std::vector<double>> xo(static_cast<std::size_t>(c_in));
        for (int ci = 0; ci < c_in; ++ci) xo[static_cast<std::size_t>(ci)].assign(x.row(0, ci), x.row(0, ci) + n);
        std::vector<std::vector<std::vector<double>>> wo(
            static_cast<std::size_t>(c_in),
            std::vector<std::vector<double>>(static_cast<std::size_t>(c_out), std::vector<double>(static_cast<std::size_t>(k))));
        for (int ci = 0; ci < c_in; ++ci)
            for (int co = 0; co < c_out; ++co)
                for (int kk = 0; kk < k; ++kk)
                    wo[ci][co][kk] = up.w.value[static_cast<std::size_t>((ci * c_out + co) * k + kk)];
        std::vector<double> bo(up.bias.value.begin(), up.bias.value.end());

        auto y = up.forward(x, target);
        auto oracle = brute_conv1d_transposed(xo, wo, bo, stride, target);
        for (int co = 0; co < c_out; ++co)
            for (int t = 0; t < target; ++t)
                CHECK(y.at(0, co, t) == doctest::Approx(oracle[static_cast<std::size_t>(co)][static_cast<std::size_t>(t)]).epsilon(1e-10));
    }
}

TEST_CASE("conv and transposed conv are adjoint") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int c_in = 1 + static_cast<int>(rng.below(3));
        const int c_out = 1 + static_cast<int>(rng.below(3));
        const int k = 1 + static_cast<int>(rng.below(7));
        const int stride = 1 + static_cast<int>(rng.below(3));
        const int n = 4 + static_cast<int>(rng.below(20));
        Conv1d<double> conv("t", c_in, c_out, k, stride);
        randomize_param(rng, conv.w);
        ConvTranspose1d<double> up("t", c_out, c_in, k, stride);
        for (int co = 0; co < c_out; ++co)
            for (int ci = 0; ci < c_in; ++ci)
                for (int kk = 0; kk < k; ++kk)
                    up.w.value[static_cast<std::size_t>((co * c_in + ci) * k + kk)] =
                        conv.w.value[static_cast<std::size_t>((co * c_in + ci) * k + kk)];

        Tensor3<double> x = random_tensor<double>(rng, 1, c_in, n);
        auto cx = conv.forward(x);
        Tensor3<double> y = random_tensor<double>(rng, 1, c_out, cx.n);
        auto ty = up.forward(y, n);

        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < cx.v.size(); ++i) lhs += cx.v[i] * y.v[i];
        for (std::size_t i = 0; i < x.v.size(); ++i) rhs += x.v[i] * ty.v[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-7));
    }
}

TEST_CASE("relu forward examples and gradient mask") {
    Tensor3<float> x(1, 1, 3);
    x.v = {-1.f, 0.f, 2.f};
    auto y = relu(x);
    CHECK(y.v[0] == 0.f);
    CHECK(y.v[1] == 0.f);
    CHECK(y.v[2] == 2.f);

    Tensor3<float> nonneg(1, 1, 4);
    nonneg.v = {0.f, 1.f, 2.f, 3.f};
    auto id = relu(nonneg);
    for (std::size_t i = 0; i < 4; ++i) CHECK(id.v[i] == nonneg.v[i]);

    // gradient of sum(relu(x)) at (-1, 2) is (0, 1)
    Tensor3<float> x2(1, 1, 2);
    x2.v = {-1.f, 2.f};
    Tensor3<float> ones(1, 1, 2);
    ones.v = {1.f, 1.f};
    auto g = relu_backward(ones, x2);
    CHECK(g.v[0] == 0.f);
    CHECK(g.v[1] == 1.f);
}

TEST_CASE("batch_norm train-mode normalization contract") {
    Rng rng(5);
    BatchNorm1d<float> bn("t", 3);
    Tensor3<float> x = random_tensor<float>(rng, 4, 3, 32, -2.0, 5.0);
    BatchNorm1d<float>::Cache cache;
    auto y = bn.forward_train(x, cache);
    for (int ci = 0; ci < 3; ++ci) {
        double sum = 0.0, sum2 = 0.0;
        for (int bi = 0; bi < 4; ++bi)
            for (int t = 0; t < 32; ++t) {
                sum += y.at(bi, ci, t);
                sum2 += static_cast<double>(y.at(bi, ci, t)) * y.at(bi, ci, t);
            }
        const double mean = sum / (4 * 32);
        const double var = sum2 / (4 * 32) - mean * mean;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batch_norm infer mode with unit running stats is identity") {
    BatchNorm1d<float> bn("t", 2);
    Rng rng(6);
    Tensor3<float> x = random_tensor<float>(rng, 2, 2, 16);
    auto y = bn.forward_infer(x);
    for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == doctest::Approx(x.v[i]).epsilon(1e-5));
}

TEST_CASE("batch_norm single channel example values") {
    BatchNorm1d<float> bn("t", 1);
    Tensor3<float> x(1, 1, 4);
    x.v = {1.f, 2.f, 3.f, 4.f};
    BatchNorm1d<float>::Cache cache;
    auto y = bn.forward_train(x, cache);
    const std::vector<double> expect = {-1.3416, -0.4472, 0.4472, 1.3416};
    for (int t = 0; t < 4; ++t) CHECK(y.at(0, 0, t) == doctest::Approx(expect[static_cast<std::size_t>(t)]).epsilon(1e-3));
}

TEST_CASE("batch_norm rejects empty batch") {
    BatchNorm1d<float> bn("t", 1);
    Tensor3<float> x(0, 1, 4);
    BatchNorm1d<float>::Cache cache;
    CHECK_THROWS_AS(bn.forward_train(x, cache), Error);
}

TEST_CASE("adam: zero grad leaves params unchanged, lr=0 never moves them") {
    ParamTensor<float> p("p", {4});
    p.value = {1.f, -2.f, 3.f, 0.5f};
    auto before = p.value;
    adam_step<float>({&p}, {.lr = 1e-2});
    CHECK(p.value == before);
    CHECK(p.step_count == 1);

    Rng rng(9);
    for (auto& g : p.grad) g = static_cast<float>(rng.normal());
    adam_step<float>({&p}, {.lr = 0.0});
    CHECK(p.value == before);
    for (auto g : p.grad) CHECK(g == 0.f);
}

TEST_CASE("adam first step matches the closed form") {
    ParamTensor<double> p("p", {1});
    p.value = {1.0};
    p.grad = {0.5};
    adam_step<double>({&p}, {.lr = 1e-4});
    const double expect = 1.0 - 1e-4 * 0.5 / (std::sqrt(0.25) + 1e-8);
    CHECK(p.value[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adam matches independent reference over many steps") {
    Rng rng(12);
    ParamTensor<double> p("p", {8});
    std::vector<double> ref(8);
    for (int i = 0; i < 8; ++i) {
        p.value[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
        ref[static_cast<std::size_t>(i)] = p.value[static_cast<std::size_t>(i)];
    }
    RefAdamState st;
    for (int step = 0; step < 10; ++step) {
        std::vector<double> g(8);
        for (int i = 0; i < 8; ++i) g[static_cast<std::size_t>(i)] = rng.normal();
        p.grad.assign(g.begin(), g.end());
        adam_step<double>({&p}, {.lr = 1e-3});
        ref_adam_step(ref, g, st, 1e-3);
        for (int i = 0; i < 8; ++i)
            CHECK(p.value[static_cast<std::size_t>(i)] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-7));
    }
}

TEST_CASE("finite differences sanity: f(p)=p^2 and constants") {
    double p = 3.0;
    auto g = finite_difference_gradient<double>([&] { return p * p; }, {&p}, 1e-3);
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));
    auto g0 = finite_difference_gradient<double>([&] { return 42.0; }, {&p}, 1e-3);
    CHECK(g0[0] == 0.0);
}

TEST_CASE("layer gradients match finite differences (64-bit shadow path)") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        CHECK(conv_grad_check<double>(seed, false) < 1e-6);
        CHECK(conv_grad_check<double>(seed, true) < 1e-6);
        CHECK(batchnorm_grad_check<double>(seed) < 1e-6);
    }
}

TEST_CASE("layer gradients match finite differences (32-bit path)") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        CHECK(conv_grad_check<float>(seed, false) < 1e-3);
        CHECK(conv_grad_check<float>(seed, true) < 1e-3);
        CHECK(batchnorm_grad_check<float>(seed) < 1e-3);
    }
}

TEST_CASE("relu analytic gradient matches finite differences away from the kink") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Tensor3<double> x(1, 2, 8);
        for (auto& v : x.v) {
            v = rng.uniform(-1, 1);
            if (std::fabs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
        }
        LinearHead<double> head(rng, x.v.size());
        std::vector<double*> coords;
        for (auto& v : x.v) coords.push_back(&v);
        auto numeric = finite_difference_gradient<double>([&] { return head.value(relu(x)); }, coords, 1e-5);
        auto dx = relu_backward(head.grad(relu(x)), x);
        std::vector<double> analytic(dx.v.begin(), dx.v.end());
        CHECK(max_relative_error(analytic, numeric) < 1e-6);
    }
}

} // TEST_SUITE
