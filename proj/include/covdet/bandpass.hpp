#pragma once

#include <complex>
#include <vector>

namespace covdet {

struct Biquad {
    double b0, b1, b2; // numerator
    double a1, a2;     // denominator, a0 normalized to 1
};

// Cascade of second-order sections for a digital Butterworth band-pass filter
// (bilinear transform of the analog prototype; for order n the cascade has n
// sections and 2n poles).
struct SosFilter {
    std::vector<Biquad> sections;
    double gain = 1.0;

    // |H(e^{i 2 pi f / fs})|
    double magnitude(double freq_hz, double fs_hz) const;
};

SosFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs_hz);

// Single forward pass, zero initial state.
void sos_filter_inplace(const SosFilter& f, std::vector<double>& x);

// Forward-backward (zero phase) application with odd-reflection edge padding.
void filtfilt(const SosFilter& f, float* x, int n, int pad);

// 4th-order Butterworth band-pass, applied forward-backward with 300 samples
// of reflection padding, on each of the 3 channels in place.
void bandpass_3c(float* samples, int n, double fs_hz, double lo_hz, double hi_hz);

} // namespace covdet
