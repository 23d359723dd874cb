#include "advf/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace advf {

AdamState AdamState::init(const std::vector<Tensor>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor& p : params) {
        s.m.emplace_back(p.shape);
        s.v.emplace_back(p.shape);
    }
    return s;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamOptions& opt) {
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw std::invalid_argument("adam_step: params/grads/state tensor counts disagree");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(opt.beta1), static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(static_cast<double>(opt.beta2), static_cast<double>(state.t));
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        const Tensor& g = grads[k];
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        if (!same_shape(p, g) || !same_shape(p, m)) {
            throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(k));
        }
        for (size_t i = 0; i < p.v.size(); ++i) {
            const double gi = g.v[i];
            const double mi = opt.beta1 * m.v[i] + (1.0 - opt.beta1) * gi;
            const double vi = opt.beta2 * v.v[i] + (1.0 - opt.beta2) * gi * gi;
            m.v[i] = static_cast<float>(mi);
            v.v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.v[i] = static_cast<float>(p.v[i] - opt.lr * mhat / (std::sqrt(vhat) + opt.eps));
        }
    }
}

}  // namespace advf
