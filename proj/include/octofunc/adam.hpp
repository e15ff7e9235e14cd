#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "octofunc/tensor.hpp"

namespace octofunc {

// Standard Adam with bias correction. One state per trained parameter set; the
// moment buffers are keyed positionally to the parameter list.
struct AdamState {
    std::vector<Tensor> m, v;
    int64_t t = 0;
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;

    static AdamState init(std::span<Tensor* const> params, float lr);
};

// Applies one update from each param's grad buffer (missing/empty grads count
// as zero) and increments t. Gradients are not cleared.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace octofunc
