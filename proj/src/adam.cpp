#include "octofunc/adam.hpp"

#include <cmath>

namespace octofunc {

AdamState AdamState::init(std::span<Tensor* const> params, float lr) {
    AdamState s;
    s.lr = lr;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape));
        s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
}

void adam_step(std::span<Tensor* const> params, AdamState& state) {
    require_shape(params.size() == state.m.size(), "adam state / param count");
    state.t += 1;
    float bc1 = 1.0f - std::pow(state.beta1, static_cast<float>(state.t));
    float bc2 = 1.0f - std::pow(state.beta2, static_cast<float>(state.t));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        require_shape(p.shape == state.m[pi].shape, "adam moment shape");
        float* m = state.m[pi].data.data();
        float* v = state.v[pi].data.data();
        const bool has_grad = p.grad.size() == p.data.size();
        for (size_t i = 0; i < p.data.size(); ++i) {
            float g = has_grad ? p.grad[i] : 0.0f;
            m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g * g;
            float mhat = m[i] / bc1;
            float vhat = v[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace octofunc
