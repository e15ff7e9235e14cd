#pragma once

// Central-difference gradient checking (h = 1e-3, double-precision quotient)
// against the tape's analytic gradients.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "octofunc/autodiff.hpp"
#include "octofunc/rng.hpp"
#include "octofunc/tensor.hpp"

namespace octofunc::testsupport {

// Builds a scalar loss node from parameter leaves. The builder is re-invoked
// on a fresh tape for every finite-difference evaluation, so it must be a pure
// function of the current parameter values.
using LossBuilder = std::function<int(Tape&, const std::vector<int>& leaves)>;

struct GradCheckResult {
    double rel_error = 0.0;
    bool ok = false;
};

inline double norm2(const std::vector<float>& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

inline GradCheckResult gradcheck(std::vector<Tensor>& params, const LossBuilder& build,
                                 double tolerance = 1e-2) {
    auto forward = [&]() {
        Tape tape;
        std::vector<int> leaves;
        leaves.reserve(params.size());
        for (Tensor& p : params) leaves.push_back(tape.leaf(&p));
        int loss = build(tape, leaves);
        return static_cast<double>(tape.scalar_value(loss));
    };

    for (Tensor& p : params) {
        p.grad.clear();
        p.ensure_grad();
    }
    {
        Tape tape;
        std::vector<int> leaves;
        for (Tensor& p : params) leaves.push_back(tape.leaf(&p));
        tape.backward(build(tape, leaves));
    }

    const double h = 1e-3;
    std::vector<float> analytic, fd;
    for (Tensor& p : params) {
        for (size_t i = 0; i < p.data.size(); ++i) {
            float saved = p.data[i];
            p.data[i] = saved + static_cast<float>(h);
            double up = forward();
            p.data[i] = saved - static_cast<float>(h);
            double down = forward();
            p.data[i] = saved;
            fd.push_back(static_cast<float>((up - down) / (2.0 * h)));
            analytic.push_back(p.grad[i]);
        }
    }

    std::vector<float> diff(analytic.size());
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - fd[i];
    double denom = norm2(analytic) + norm2(fd);
    GradCheckResult r;
    r.rel_error = denom < 1e-9 ? norm2(diff) : norm2(diff) / denom;
    r.ok = r.rel_error < tolerance;
    return r;
}

inline Tensor random_tensor(Rng& rng, std::vector<int> shape, float scale = 1.0f) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.gaussian(0.0f, scale);
    return t;
}

}  // namespace octofunc::testsupport
