#pragma once

#include <vector>

#include "covdet/tensor.hpp"

namespace covdet {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update with bias correction, applied in place; grads are zeroed
// afterwards and each tensor's step_count advances by one.
template <class R>
void adam_step(const std::vector<ParamTensor<R>*>& params, const AdamConfig& cfg);

} // namespace covdet
