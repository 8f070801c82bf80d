#include "covdet/optimizer.hpp"

#include <cmath>

namespace covdet {

template <class R>
void adam_step(const std::vector<ParamTensor<R>*>& params, const AdamConfig& cfg) {
    for (ParamTensor<R>* p : params) {
        p->step_count += 1;
        const double t = static_cast<double>(p->step_count);
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        const R b1 = static_cast<R>(cfg.beta1);
        const R b2 = static_cast<R>(cfg.beta2);
        const R one_m_b1 = static_cast<R>(1.0 - cfg.beta1);
        const R one_m_b2 = static_cast<R>(1.0 - cfg.beta2);
        const R lr1 = static_cast<R>(cfg.lr / bc1);
        const R inv_sqrt_bc2 = static_cast<R>(1.0 / std::sqrt(bc2));
        const R eps = static_cast<R>(cfg.eps);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const R g = p->grad[i];
            p->m[i] = b1 * p->m[i] + one_m_b1 * g;
            p->v[i] = b2 * p->v[i] + one_m_b2 * g * g;
            p->value[i] -= lr1 * p->m[i] / (std::sqrt(p->v[i]) * inv_sqrt_bc2 + eps);
            p->grad[i] = R(0);
        }
    }
}

template void adam_step<float>(const std::vector<ParamTensor<float>*>&, const AdamConfig&);
template void adam_step<double>(const std::vector<ParamTensor<double>*>&, const AdamConfig&);

} // namespace covdet
