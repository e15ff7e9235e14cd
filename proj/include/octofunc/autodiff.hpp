#pragma once

#include <span>
#include <vector>

#include "octofunc/tensor.hpp"

namespace octofunc {

enum class OpKind {
    Leaf,
    Matmul,
    Add,
    EmbeddingLookup,
    LayerNorm,
    Gelu,
    SoftmaxRow,
    ScaledDotAttention,
    ConcatRows,
    MeanRows,
    L2NormalizeRows,
    Transpose,
    Reshape,
    ScalarMul,
    ScaleConst,
    Exp,
    InnerProduct,
    CrossEntropy,
    WeightedNllSum,
};

const char* op_kind_name(OpKind k);

// Define-by-run reverse-mode tape. Forward values are computed eagerly as
// nodes are appended; backward() walks the recorded graph in reverse and
// accumulates gradients, adding parameter gradients into Tensor::grad.
class Tape {
public:
    // Parameter leaf: value is copied, gradients flow into param->grad.
    int leaf(Tensor* param);
    // Constant input: no gradient is propagated out of it.
    int constant(Tensor value);

    int matmul(int a, int b);
    int add(int a, int b);  // same shape, or b broadcast over rows of a
    int embedding_lookup(int table, std::vector<int> ids);
    int layer_norm(int x, int gamma, int beta);  // row-wise, eps 1e-5
    int gelu(int x);
    int softmax_row(int x);
    int scaled_dot_attention(int q, int k, int v, int n_heads, bool causal);
    int concat_rows(int a, int b);
    int mean_rows(int x);          // [T x D] -> [1 x D]
    int l2_normalize_rows(int x);
    int transpose(int x);
    int reshape_rows(int x, int rows, int cols);  // same data, new 2-D shape
    int scalar_mul(int x, int s);  // s is a single-element tensor
    int scale_const(int x, float c);
    int exp(int x);
    int inner_product(int a, int b);  // scalar sum(a*b)
    // mean over masked positions of -log softmax(logits)[target]; mask values
    // are 0/1 weights, AllMasked when the mask sums to zero
    int cross_entropy(int logits, std::vector<int> targets, std::vector<float> mask);
    // sum of w_i * nll_i with arbitrary real weights (policy-gradient form)
    int weighted_nll_sum(int logits, std::vector<int> targets, std::vector<float> weights);

    const Tensor& value(int node) const { return nodes_[static_cast<size_t>(node)].value; }
    float scalar_value(int node) const;
    std::span<const float> grad(int node) const;

    void backward(int loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        OpKind kind;
        int a = -1, b = -1, c = -1;
        Tensor value;
        std::vector<float> grad;
        std::vector<int> ids;
        std::vector<float> weights;
        float attr = 0.0f;
        int heads = 1;
        bool causal = false;
        std::vector<Tensor> aux;
        Tensor* param = nullptr;
    };

    int push(Node n);
    Node& at(int i) { return nodes_[static_cast<size_t>(i)]; }
    const Node& at(int i) const { return nodes_[static_cast<size_t>(i)]; }
    std::vector<float>& grad_buf(int i);
    void backward_node(int i);

    std::vector<Node> nodes_;
};

// Kernels shared with inference paths.
namespace kernels {
// C (+)= A[MxK] * B[KxN]
void gemm(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
// C (+)= A[MxK] * B[NxK]^T
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
// C (+)= A[KxM]^T * B[KxN]
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void softmax_row_inplace(float* row, int n);
float gelu_scalar(float x);
}  // namespace kernels

}  // namespace octofunc
