#include "octofunc/tensor.hpp"

namespace octofunc {

namespace {
int64_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 2)
        throw Error(Errc::shape_mismatch, "tensors are rank 1 or 2");
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw Error(Errc::shape_mismatch, "non-positive dimension");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    int64_t n = checked_numel(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0f);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values) {
    int64_t n = checked_numel(shape);
    if (n != static_cast<int64_t>(values.size()))
        throw Error(Errc::shape_mismatch, "value count does not match shape");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void require_shape(bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::shape_mismatch, what);
}

}  // namespace octofunc
