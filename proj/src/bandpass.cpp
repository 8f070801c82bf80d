#include "covdet/bandpass.hpp"

#include <algorithm>
#include <cmath>

#include "covdet/errors.hpp"

namespace covdet {

namespace {
using cd = std::complex<double>;
constexpr double kPi = 3.141592653589793238462643383279502884;
} // namespace

SosFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs_hz) {
    require(order > 0, ErrorKind::usage, "bandpass: order must be positive");
    require(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs_hz / 2.0, ErrorKind::usage,
            "bandpass: need 0 < lo < hi < fs/2, got lo=" + std::to_string(lo_hz) + " hi=" + std::to_string(hi_hz) +
                " fs=" + std::to_string(fs_hz));

    // Analog low-pass prototype poles on the unit circle, left half-plane.
    std::vector<cd> proto;
    for (int k = 0; k < order; ++k) {
        const double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
        proto.emplace_back(std::cos(theta), std::sin(theta));
    }

    // Pre-warped band edges, low-pass -> band-pass transform.
    const double w_lo = 2.0 * fs_hz * std::tan(kPi * lo_hz / fs_hz);
    const double w_hi = 2.0 * fs_hz * std::tan(kPi * hi_hz / fs_hz);
    const double bw = w_hi - w_lo;
    const double w0sq = w_lo * w_hi;

    std::vector<cd> poles; // 2*order analog poles; `order` zeros sit at s = 0
    for (const cd& p : proto) {
        const cd half = p * (bw / 2.0);
        const cd disc = std::sqrt(half * half - w0sq);
        poles.push_back(half + disc);
        poles.push_back(half - disc);
    }

    // Bilinear transform at fs2 = 2 fs.
    const double fs2 = 2.0 * fs_hz;
    cd denom{1.0, 0.0};
    std::vector<cd> zpoles;
    for (const cd& p : poles) {
        denom *= (fs2 - p);
        zpoles.push_back((fs2 + p) / (fs2 - p));
    }
    const double k_digital = std::pow(bw, order) * std::pow(fs2, order) / denom.real();

    // Pair conjugate poles into biquads; each section takes one zero at z=+1
    // and one at z=-1 (the images of s=0 and s=inf).
    std::vector<cd> upper;
    for (const cd& p : zpoles)
        if (p.imag() > 0.0) upper.push_back(p);
    require(static_cast<int>(upper.size()) == order, ErrorKind::runtime, "bandpass: expected conjugate pole pairs");
    std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });

    SosFilter f;
    f.gain = k_digital;
    for (const cd& p : upper) {
        Biquad s{};
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = -2.0 * p.real();
        s.a2 = std::norm(p);
        f.sections.push_back(s);
    }
    return f;
}

double SosFilter::magnitude(double freq_hz, double fs_hz) const {
    const cd z = std::exp(cd(0.0, 2.0 * kPi * freq_hz / fs_hz));
    const cd zi = 1.0 / z;
    cd h{gain, 0.0};
    for (const Biquad& s : sections) {
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    }
    return std::abs(h);
}

void sos_filter_inplace(const SosFilter& f, std::vector<double>& x) {
    for (double& v : x) v *= f.gain;
    for (const Biquad& s : f.sections) {
        double s1 = 0.0, s2 = 0.0;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + s1;
            s1 = s.b1 * in - s.a1 * out + s2;
            s2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

void filtfilt(const SosFilter& f, float* x, int n, int pad) {
    if (n == 0) return;
    pad = std::min(pad, n - 1);
    std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
    // odd reflection about the first and last samples
    for (int i = 0; i < pad; ++i) ext[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[pad - i];
    for (int i = 0; i < n; ++i) ext[static_cast<std::size_t>(pad + i)] = x[i];
    for (int i = 0; i < pad; ++i) ext[static_cast<std::size_t>(pad + n + i)] = 2.0 * x[n - 1] - x[n - 2 - i];

    sos_filter_inplace(f, ext);
    std::reverse(ext.begin(), ext.end());
    sos_filter_inplace(f, ext);
    std::reverse(ext.begin(), ext.end());

    for (int i = 0; i < n; ++i) x[i] = static_cast<float>(ext[static_cast<std::size_t>(pad + i)]);
}

void bandpass_3c(float* samples, int n, double fs_hz, double lo_hz, double hi_hz) {
    const SosFilter f = butter_bandpass(4, lo_hz, hi_hz, fs_hz);
    for (int c = 0; c < 3; ++c) filtfilt(f, samples + static_cast<std::size_t>(c) * n, n, 300);
}

} // namespace covdet
