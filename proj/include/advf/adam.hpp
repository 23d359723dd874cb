#pragma once

#include <vector>

#include "advf/tensor.hpp"

namespace advf {

struct AdamOptions {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// First/second moment estimates, one pair per parameter tensor.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t t = 0;

    static AdamState init(const std::vector<Tensor>& params);
};

// Standard Adam update with bias correction; params and state advanced in place.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamOptions& opt);

}  // namespace advf
