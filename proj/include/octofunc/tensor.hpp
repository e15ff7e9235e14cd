#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "octofunc/error.hpp"

namespace octofunc {

// Dense row-major float32 tensor, rank 1 or 2. The optional grad buffer is
// allocated lazily and always matches the data shape.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, float value);
    static Tensor from(std::vector<int> shape, std::vector<float> values);
    static Tensor scalar(float value) { return from({1}, {value}); }

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

    // 2-D view: rank-1 tensors behave as a single row
    int rows() const { return shape.size() == 2 ? shape[0] : 1; }
    int cols() const { return shape.size() == 2 ? shape[1] : (shape.empty() ? 0 : shape[0]); }

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0f);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;
};

void require_shape(bool ok, const std::string& what);

}  // namespace octofunc
