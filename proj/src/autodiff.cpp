#include "octofunc/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace octofunc {

namespace kernels {

void gemm(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, 0.0f);
        const float* arow = a + static_cast<size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            float av = arow[kk];
            const float* brow = b + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<size_t>(i) * k;
        float* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const float* brow = b + static_cast<size_t>(j) * k;
            float s = 0.0f;
            for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0f);
    for (int kk = 0; kk < k; ++kk) {
        const float* arow = a + static_cast<size_t>(kk) * m;
        const float* brow = b + static_cast<size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            float av = arow[i];
            float* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void softmax_row_inplace(float* row, int n) {
    float mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < n; ++j) row[j] *= inv;
}

float gelu_scalar(float x) {
    constexpr float kSqrt2OverPi = 0.7978845608028654f;
    float u = kSqrt2OverPi * (x + 0.044715f * x * x * x);
    return 0.5f * x * (1.0f + std::tanh(u));
}

}  // namespace kernels

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Matmul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::EmbeddingLookup: return "embedding_lookup";
        case OpKind::LayerNorm: return "layer_norm";
        case OpKind::Gelu: return "gelu";
        case OpKind::SoftmaxRow: return "softmax_row";
        case OpKind::ScaledDotAttention: return "scaled_dot_attention";
        case OpKind::ConcatRows: return "concat_rows";
        case OpKind::MeanRows: return "mean_rows";
        case OpKind::L2NormalizeRows: return "l2_normalize_rows";
        case OpKind::Transpose: return "transpose";
        case OpKind::Reshape: return "reshape";
        case OpKind::ScalarMul: return "scalar_mul";
        case OpKind::ScaleConst: return "scale_const";
        case OpKind::Exp: return "exp";
        case OpKind::InnerProduct: return "inner_product";
        case OpKind::CrossEntropy: return "cross_entropy";
        case OpKind::WeightedNllSum: return "weighted_nll_sum";
    }
    return "?";
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
}

float Tape::scalar_value(int node) const {
    const Tensor& v = value(node);
    require_shape(v.numel() == 1, "scalar_value on non-scalar node");
    return v.data[0];
}

std::span<const float> Tape::grad(int node) const {
    return at(node).grad;
}

std::vector<float>& Tape::grad_buf(int i) {
    Node& n = at(i);
    if (n.grad.empty()) n.grad.assign(n.value.data.size(), 0.0f);
    return n.grad;
}

int Tape::leaf(Tensor* param) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = *param;
    n.param = param;
    return push(std::move(n));
}

int Tape::constant(Tensor value) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_shape(A.cols() == B.rows(), "matmul " + A.shape_str() + " x " + B.shape_str());
    Node n;
    n.kind = OpKind::Matmul;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({A.rows(), B.cols()});
    kernels::gemm(A.data.data(), B.data.data(), n.value.data.data(), A.rows(), A.cols(), B.cols(),
                  false);
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    bool broadcast = !A.same_shape(B);
    if (broadcast)
        require_shape(B.numel() == A.cols(), "add " + A.shape_str() + " + " + B.shape_str());
    Node n;
    n.kind = OpKind::Add;
    n.a = a;
    n.b = b;
    n.value = A;
    n.value.grad.clear();
    if (broadcast) {
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) n.value.at(i, j) += B.data[static_cast<size_t>(j)];
    } else {
        for (size_t i = 0; i < A.data.size(); ++i) n.value.data[i] += B.data[i];
    }
    return push(std::move(n));
}

int Tape::embedding_lookup(int table, std::vector<int> ids) {
    const Tensor& T = value(table);
    require_shape(T.shape.size() == 2, "embedding table must be 2-D");
    for (int id : ids)
        require_shape(id >= 0 && id < T.rows(), "embedding id out of range");
    Node n;
    n.kind = OpKind::EmbeddingLookup;
    n.a = table;
    n.value = Tensor::zeros({static_cast<int>(ids.size()), T.cols()});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(T.data.data() + static_cast<size_t>(ids[i]) * T.cols(), T.cols(),
                    n.value.data.data() + i * static_cast<size_t>(T.cols()));
    n.ids = std::move(ids);
    return push(std::move(n));
}

int Tape::layer_norm(int x, int gamma, int beta) {
    const Tensor& X = value(x);
    const Tensor& G = value(gamma);
    const Tensor& Bt = value(beta);
    int rows = X.rows(), cols = X.cols();
    require_shape(G.numel() == cols && Bt.numel() == cols, "layer_norm affine shape");
    constexpr float kEps = 1e-5f;
    Node n;
    n.kind = OpKind::LayerNorm;
    n.a = x;
    n.b = gamma;
    n.c = beta;
    n.value = Tensor::zeros(X.shape);
    Tensor xhat = Tensor::zeros(X.shape);
    Tensor inv = Tensor::zeros({rows});
    for (int i = 0; i < rows; ++i) {
        const float* xr = X.data.data() + static_cast<size_t>(i) * cols;
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += xr[j];
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            double d = xr[j] - mean;
            var += d * d;
        }
        var /= cols;
        float iv = static_cast<float>(1.0 / std::sqrt(var + kEps));
        inv.data[static_cast<size_t>(i)] = iv;
        float* hr = xhat.data.data() + static_cast<size_t>(i) * cols;
        float* yr = n.value.data.data() + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) {
            hr[j] = (xr[j] - static_cast<float>(mean)) * iv;
            yr[j] = hr[j] * G.data[static_cast<size_t>(j)] + Bt.data[static_cast<size_t>(j)];
        }
    }
    n.aux.push_back(std::move(xhat));
    n.aux.push_back(std::move(inv));
    return push(std::move(n));
}

int Tape::gelu(int x) {
    const Tensor& X = value(x);
    Node n;
    n.kind = OpKind::Gelu;
    n.a = x;
    n.value = Tensor::zeros(X.shape);
    for (size_t i = 0; i < X.data.size(); ++i) n.value.data[i] = kernels::gelu_scalar(X.data[i]);
    return push(std::move(n));
}

int Tape::softmax_row(int x) {
    const Tensor& X = value(x);
    Node n;
    n.kind = OpKind::SoftmaxRow;
    n.a = x;
    n.value = X;
    n.value.grad.clear();
    for (int i = 0; i < X.rows(); ++i)
        kernels::softmax_row_inplace(n.value.data.data() + static_cast<size_t>(i) * X.cols(),
                                     X.cols());
    return push(std::move(n));
}

int Tape::scaled_dot_attention(int q, int k, int v, int n_heads, bool causal) {
    const Tensor& Q = value(q);
    const Tensor& K = value(k);
    const Tensor& V = value(v);
    require_shape(Q.same_shape(K) && K.same_shape(V), "attention q/k/v shapes");
    int t = Q.rows(), d = Q.cols();
    require_shape(n_heads > 0 && d % n_heads == 0, "attention head split");
    int dh = d / n_heads;
    float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    Node n;
    n.kind = OpKind::ScaledDotAttention;
    n.a = q;
    n.b = k;
    n.c = v;
    n.heads = n_heads;
    n.causal = causal;
    n.value = Tensor::zeros(Q.shape);

    std::vector<float> qh(static_cast<size_t>(t) * dh), kh(qh.size()), vh(qh.size());
    for (int h = 0; h < n_heads; ++h) {
        int off = h * dh;
        for (int i = 0; i < t; ++i) {
            std::copy_n(Q.data.data() + static_cast<size_t>(i) * d + off, dh,
                        qh.data() + static_cast<size_t>(i) * dh);
            std::copy_n(K.data.data() + static_cast<size_t>(i) * d + off, dh,
                        kh.data() + static_cast<size_t>(i) * dh);
            std::copy_n(V.data.data() + static_cast<size_t>(i) * d + off, dh,
                        vh.data() + static_cast<size_t>(i) * dh);
        }
        Tensor probs = Tensor::zeros({t, t});
        kernels::gemm_nt(qh.data(), kh.data(), probs.data.data(), t, dh, t, false);
        for (int i = 0; i < t; ++i) {
            float* row = probs.data.data() + static_cast<size_t>(i) * t;
            int limit = causal ? i + 1 : t;
            for (int j = 0; j < limit; ++j) row[j] *= scale;
            for (int j = limit; j < t; ++j) row[j] = -1e30f;
            kernels::softmax_row_inplace(row, t);
            if (causal)
                for (int j = limit; j < t; ++j) row[j] = 0.0f;
        }
        std::vector<float> oh(static_cast<size_t>(t) * dh);
        kernels::gemm(probs.data.data(), vh.data(), oh.data(), t, t, dh, false);
        for (int i = 0; i < t; ++i)
            std::copy_n(oh.data() + static_cast<size_t>(i) * dh, dh,
                        n.value.data.data() + static_cast<size_t>(i) * d + off);
        n.aux.push_back(std::move(probs));
    }
    return push(std::move(n));
}

int Tape::concat_rows(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_shape(A.cols() == B.cols(), "concat_rows column mismatch");
    Node n;
    n.kind = OpKind::ConcatRows;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({A.rows() + B.rows(), A.cols()});
    std::copy(A.data.begin(), A.data.end(), n.value.data.begin());
    std::copy(B.data.begin(), B.data.end(), n.value.data.begin() + A.data.size());
    return push(std::move(n));
}

int Tape::mean_rows(int x) {
    const Tensor& X = value(x);
    int rows = X.rows(), cols = X.cols();
    Node n;
    n.kind = OpKind::MeanRows;
    n.a = x;
    n.value = Tensor::zeros({1, cols});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) n.value.data[static_cast<size_t>(j)] += X.at(i, j);
    float inv = 1.0f / static_cast<float>(rows);
    for (auto& v : n.value.data) v *= inv;
    return push(std::move(n));
}

int Tape::l2_normalize_rows(int x) {
    const Tensor& X = value(x);
    int rows = X.rows(), cols = X.cols();
    Node n;
    n.kind = OpKind::L2NormalizeRows;
    n.a = x;
    n.value = Tensor::zeros(X.shape);
    Tensor norms = Tensor::zeros({rows});
    for (int i = 0; i < rows; ++i) {
        const float* xr = X.data.data() + static_cast<size_t>(i) * cols;
        double s = 0.0;
        for (int j = 0; j < cols; ++j) s += static_cast<double>(xr[j]) * xr[j];
        float nm = static_cast<float>(std::sqrt(std::max(s, 1e-24)));
        norms.data[static_cast<size_t>(i)] = nm;
        float iv = 1.0f / nm;
        float* yr = n.value.data.data() + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) yr[j] = xr[j] * iv;
    }
    n.aux.push_back(std::move(norms));
    return push(std::move(n));
}

int Tape::transpose(int x) {
    const Tensor& X = value(x);
    int rows = X.rows(), cols = X.cols();
    Node n;
    n.kind = OpKind::Transpose;
    n.a = x;
    n.value = Tensor::zeros({cols, rows});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) n.value.at(j, i) = X.at(i, j);
    return push(std::move(n));
}

int Tape::reshape_rows(int x, int rows, int cols) {
    const Tensor& X = value(x);
    require_shape(static_cast<int64_t>(rows) * cols == X.numel(), "reshape_rows element count");
    Node n;
    n.kind = OpKind::Reshape;
    n.a = x;
    n.value = X;
    n.value.grad.clear();
    n.value.shape = {rows, cols};
    return push(std::move(n));
}

int Tape::scalar_mul(int x, int s) {
    const Tensor& X = value(x);
    const Tensor& S = value(s);
    require_shape(S.numel() == 1, "scalar_mul needs a single-element scale");
    Node n;
    n.kind = OpKind::ScalarMul;
    n.a = x;
    n.b = s;
    n.value = X;
    n.value.grad.clear();
    float sv = S.data[0];
    for (auto& v : n.value.data) v *= sv;
    return push(std::move(n));
}

int Tape::scale_const(int x, float c) {
    const Tensor& X = value(x);
    Node n;
    n.kind = OpKind::ScaleConst;
    n.a = x;
    n.attr = c;
    n.value = X;
    n.value.grad.clear();
    for (auto& v : n.value.data) v *= c;
    return push(std::move(n));
}

int Tape::exp(int x) {
    const Tensor& X = value(x);
    Node n;
    n.kind = OpKind::Exp;
    n.a = x;
    n.value = X;
    n.value.grad.clear();
    for (auto& v : n.value.data) v = std::exp(v);
    return push(std::move(n));
}

int Tape::inner_product(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_shape(A.same_shape(B), "inner_product shape mismatch");
    Node n;
    n.kind = OpKind::InnerProduct;
    n.a = a;
    n.b = b;
    double s = 0.0;
    for (size_t i = 0; i < A.data.size(); ++i) s += static_cast<double>(A.data[i]) * B.data[i];
    n.value = Tensor::scalar(static_cast<float>(s));
    return push(std::move(n));
}

namespace {

// probs, per-position nll; shared by the two NLL losses
Tensor softmax_and_nll(const Tensor& logits, const std::vector<int>& targets,
                       std::vector<double>& nll) {
    int t = logits.rows(), vsz = logits.cols();
    Tensor probs = logits;
    probs.grad.clear();
    nll.assign(static_cast<size_t>(t), 0.0);
    for (int i = 0; i < t; ++i) {
        float* row = probs.data.data() + static_cast<size_t>(i) * vsz;
        float mx = row[0];
        for (int j = 1; j < vsz; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < vsz; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
        double lse = mx + std::log(sum);
        nll[static_cast<size_t>(i)] =
            lse - static_cast<double>(row[targets[static_cast<size_t>(i)]]);
        float inv = static_cast<float>(1.0 / sum);
        for (int j = 0; j < vsz; ++j)
            row[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx)) * inv;
    }
    return probs;
}

}  // namespace

int Tape::cross_entropy(int logits, std::vector<int> targets, std::vector<float> mask) {
    const Tensor& L = value(logits);
    int t = L.rows(), vsz = L.cols();
    require_shape(static_cast<int>(targets.size()) == t, "cross_entropy target count");
    require_shape(static_cast<int>(mask.size()) == t, "cross_entropy mask length");
    for (int id : targets)
        require_shape(id >= 0 && id < vsz, "cross_entropy target out of range");
    double wsum = 0.0;
    for (float w : mask) wsum += w;
    if (wsum <= 0.0) throw Error(Errc::all_masked, "cross_entropy mask sums to zero");

    Node n;
    n.kind = OpKind::CrossEntropy;
    n.a = logits;
    std::vector<double> nll;
    n.aux.push_back(softmax_and_nll(L, targets, nll));
    double loss = 0.0;
    for (int i = 0; i < t; ++i) loss += mask[static_cast<size_t>(i)] * nll[static_cast<size_t>(i)];
    loss /= wsum;
    n.value = Tensor::scalar(static_cast<float>(loss));
    n.ids = std::move(targets);
    n.weights = std::move(mask);
    n.attr = static_cast<float>(wsum);
    return push(std::move(n));
}

int Tape::weighted_nll_sum(int logits, std::vector<int> targets, std::vector<float> weights) {
    const Tensor& L = value(logits);
    int t = L.rows(), vsz = L.cols();
    require_shape(static_cast<int>(targets.size()) == t, "weighted_nll target count");
    require_shape(static_cast<int>(weights.size()) == t, "weighted_nll weight length");
    for (int id : targets)
        require_shape(id >= 0 && id < vsz, "weighted_nll target out of range");

    Node n;
    n.kind = OpKind::WeightedNllSum;
    n.a = logits;
    std::vector<double> nll;
    n.aux.push_back(softmax_and_nll(L, targets, nll));
    double loss = 0.0;
    for (int i = 0; i < t; ++i)
        loss += weights[static_cast<size_t>(i)] * nll[static_cast<size_t>(i)];
    n.value = Tensor::scalar(static_cast<float>(loss));
    n.ids = std::move(targets);
    n.weights = std::move(weights);
    return push(std::move(n));
}

void Tape::backward(int loss) {
    Node& top = at(loss);
    if (top.value.numel() != 1)
        throw Error(Errc::not_scalar_loss, "backward from " + top.value.shape_str());
    grad_buf(loss)[0] = 1.0f;
    for (int i = loss; i >= 0; --i) {
        if (at(i).grad.empty()) continue;
        backward_node(i);
    }
}

void Tape::backward_node(int i) {
    Node& n = at(i);
    const std::vector<float>& g = n.grad;

    switch (n.kind) {
        case OpKind::Leaf: {
            if (n.param) {
                n.param->ensure_grad();
                for (size_t j = 0; j < g.size(); ++j) n.param->grad[j] += g[j];
            }
            break;
        }
        case OpKind::Matmul: {
            const Tensor& A = at(n.a).value;
            const Tensor& B = at(n.b).value;
            int m = A.rows(), k = A.cols(), nn = B.cols();
            kernels::gemm_nt(g.data(), B.data.data(), grad_buf(n.a).data(), m, nn, k, true);
            kernels::gemm_tn(A.data.data(), g.data(), grad_buf(n.b).data(), k, m, nn, true);
            break;
        }
        case OpKind::Add: {
            const Tensor& A = at(n.a).value;
            const Tensor& B = at(n.b).value;
            auto& ga = grad_buf(n.a);
            for (size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
            auto& gb = grad_buf(n.b);
            if (A.same_shape(B)) {
                for (size_t j = 0; j < g.size(); ++j) gb[j] += g[j];
            } else {
                int rows = A.rows(), cols = A.cols();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c)
                        gb[static_cast<size_t>(c)] += g[static_cast<size_t>(r) * cols + c];
            }
            break;
        }
        case OpKind::EmbeddingLookup: {
            const Tensor& T = at(n.a).value;
            auto& gt = grad_buf(n.a);
            int cols = T.cols();
            for (size_t r = 0; r < n.ids.size(); ++r) {
                float* dst = gt.data() + static_cast<size_t>(n.ids[r]) * cols;
                const float* src = g.data() + r * static_cast<size_t>(cols);
                for (int c = 0; c < cols; ++c) dst[c] += src[c];
            }
            break;
        }
        case OpKind::LayerNorm: {
            const Tensor& X = at(n.a).value;
            const Tensor& G = at(n.b).value;
            const Tensor& xhat = n.aux[0];
            const Tensor& inv = n.aux[1];
            int rows = X.rows(), cols = X.cols();
            auto& gx = grad_buf(n.a);
            auto& gg = grad_buf(n.b);
            auto& gb = grad_buf(n.c);
            for (int r = 0; r < rows; ++r) {
                const float* gy = g.data() + static_cast<size_t>(r) * cols;
                const float* hr = xhat.data.data() + static_cast<size_t>(r) * cols;
                float iv = inv.data[static_cast<size_t>(r)];
                double mean_dxhat = 0.0, mean_dxhat_h = 0.0;
                for (int c = 0; c < cols; ++c) {
                    float dxhat = gy[c] * G.data[static_cast<size_t>(c)];
                    mean_dxhat += dxhat;
                    mean_dxhat_h += static_cast<double>(dxhat) * hr[c];
                    gg[static_cast<size_t>(c)] += gy[c] * hr[c];
                    gb[static_cast<size_t>(c)] += gy[c];
                }
                mean_dxhat /= cols;
                mean_dxhat_h /= cols;
                float* gxr = gx.data() + static_cast<size_t>(r) * cols;
                for (int c = 0; c < cols; ++c) {
                    float dxhat = gy[c] * G.data[static_cast<size_t>(c)];
                    gxr[c] += iv * (dxhat - static_cast<float>(mean_dxhat) -
                                    hr[c] * static_cast<float>(mean_dxhat_h));
                }
            }
            break;
        }
        case OpKind::Gelu: {
            const Tensor& X = at(n.a).value;
            auto& gx = grad_buf(n.a);
            constexpr float kSqrt2OverPi = 0.7978845608028654f;
            for (size_t j = 0; j < g.size(); ++j) {
                float x = X.data[j];
                float u = kSqrt2OverPi * (x + 0.044715f * x * x * x);
                float th = std::tanh(u);
                float du = kSqrt2OverPi * (1.0f + 3.0f * 0.044715f * x * x);
                float d = 0.5f * (1.0f + th) + 0.5f * x * (1.0f - th * th) * du;
                gx[j] += g[j] * d;
            }
            break;
        }
        case OpKind::SoftmaxRow: {
            const Tensor& Y = n.value;
            int rows = Y.rows(), cols = Y.cols();
            auto& gx = grad_buf(n.a);
            for (int r = 0; r < rows; ++r) {
                const float* y = Y.data.data() + static_cast<size_t>(r) * cols;
                const float* gy = g.data() + static_cast<size_t>(r) * cols;
                double dot = 0.0;
                for (int c = 0; c < cols; ++c) dot += static_cast<double>(gy[c]) * y[c];
                float* gxr = gx.data() + static_cast<size_t>(r) * cols;
                for (int c = 0; c < cols; ++c)
                    gxr[c] += y[c] * (gy[c] - static_cast<float>(dot));
            }
            break;
        }
        case OpKind::ScaledDotAttention: {
            const Tensor& Q = at(n.a).value;
            const Tensor& K = at(n.b).value;
            const Tensor& V = at(n.c).value;
            int t = Q.rows(), d = Q.cols(), heads = n.heads, dh = d / heads;
            float scale = 1.0f / std::sqrt(static_cast<float>(dh));
            auto& gq = grad_buf(n.a);
            auto& gk = grad_buf(n.b);
            auto& gv = grad_buf(n.c);
            std::vector<float> qh(static_cast<size_t>(t) * dh), kh(qh.size()), vh(qh.size()),
                goh(qh.size()), da(static_cast<size_t>(t) * t), ds(da.size()), tmp(qh.size());
            for (int h = 0; h < heads; ++h) {
                int off = h * dh;
                const Tensor& probs = n.aux[static_cast<size_t>(h)];
                for (int i2 = 0; i2 < t; ++i2) {
                    std::copy_n(Q.data.data() + static_cast<size_t>(i2) * d + off, dh,
                                qh.data() + static_cast<size_t>(i2) * dh);
                    std::copy_n(K.data.data() + static_cast<size_t>(i2) * d + off, dh,
                                kh.data() + static_cast<size_t>(i2) * dh);
                    std::copy_n(V.data.data() + static_cast<size_t>(i2) * d + off, dh,
                                vh.data() + static_cast<size_t>(i2) * dh);
                    std::copy_n(g.data() + static_cast<size_t>(i2) * d + off, dh,
                                goh.data() + static_cast<size_t>(i2) * dh);
                }
                // dV_h += probs^T * dO_h
                kernels::gemm_tn(probs.data.data(), goh.data(), tmp.data(), t, t, dh, false);
                for (int i2 = 0; i2 < t; ++i2)
                    for (int c = 0; c < dh; ++c)
                        gv[static_cast<size_t>(i2) * d + off + c] +=
                            tmp[static_cast<size_t>(i2) * dh + c];
                // dA = dO_h * V_h^T, then softmax backward to dS
                kernels::gemm_nt(goh.data(), vh.data(), da.data(), t, dh, t, false);
                for (int r = 0; r < t; ++r) {
                    const float* prow = probs.data.data() + static_cast<size_t>(r) * t;
                    const float* darow = da.data() + static_cast<size_t>(r) * t;
                    double dot = 0.0;
                    for (int c = 0; c < t; ++c) dot += static_cast<double>(darow[c]) * prow[c];
                    float* dsrow = ds.data() + static_cast<size_t>(r) * t;
                    for (int c = 0; c < t; ++c)
                        dsrow[c] = prow[c] * (darow[c] - static_cast<float>(dot)) * scale;
                }
                // dQ_h += dS * K_h ; dK_h += dS^T * Q_h
                kernels::gemm(ds.data(), kh.data(), tmp.data(), t, t, dh, false);
                for (int i2 = 0; i2 < t; ++i2)
                    for (int c = 0; c < dh; ++c)
                        gq[static_cast<size_t>(i2) * d + off + c] +=
                            tmp[static_cast<size_t>(i2) * dh + c];
                kernels::gemm_tn(ds.data(), qh.data(), tmp.data(), t, t, dh, false);
                for (int i2 = 0; i2 < t; ++i2)
                    for (int c = 0; c < dh; ++c)
                        gk[static_cast<size_t>(i2) * d + off + c] +=
                            tmp[static_cast<size_t>(i2) * dh + c];
            }
            break;
        }
        case OpKind::ConcatRows: {
            const Tensor& A = at(n.a).value;
            auto& ga = grad_buf(n.a);
            auto& gb = grad_buf(n.b);
            for (size_t j = 0; j < A.data.size(); ++j) ga[j] += g[j];
            for (size_t j = 0; j < gb.size(); ++j) gb[j] += g[A.data.size() + j];
            break;
        }
        case OpKind::MeanRows: {
            const Tensor& X = at(n.a).value;
            int rows = X.rows(), cols = X.cols();
            float inv = 1.0f / static_cast<float>(rows);
            auto& gx = grad_buf(n.a);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    gx[static_cast<size_t>(r) * cols + c] += g[static_cast<size_t>(c)] * inv;
            break;
        }
        case OpKind::L2NormalizeRows: {
            const Tensor& Y = n.value;
            const Tensor& norms = n.aux[0];
            int rows = Y.rows(), cols = Y.cols();
            auto& gx = grad_buf(n.a);
            for (int r = 0; r < rows; ++r) {
                const float* y = Y.data.data() + static_cast<size_t>(r) * cols;
                const float* gy = g.data() + static_cast<size_t>(r) * cols;
                double dot = 0.0;
                for (int c = 0; c < cols; ++c) dot += static_cast<double>(gy[c]) * y[c];
                float iv = 1.0f / norms.data[static_cast<size_t>(r)];
                float* gxr = gx.data() + static_cast<size_t>(r) * cols;
                for (int c = 0; c < cols; ++c)
                    gxr[c] += (gy[c] - y[c] * static_cast<float>(dot)) * iv;
            }
            break;
        }
        case OpKind::Transpose: {
            const Tensor& X = at(n.a).value;
            int rows = X.rows(), cols = X.cols();
            auto& gx = grad_buf(n.a);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    gx[static_cast<size_t>(r) * cols + c] +=
                        g[static_cast<size_t>(c) * rows + r];
            break;
        }
        case OpKind::Reshape: {
            auto& gx = grad_buf(n.a);
            for (size_t j = 0; j < g.size(); ++j) gx[j] += g[j];
            break;
        }
        case OpKind::ScalarMul: {
            const Tensor& X = at(n.a).value;
            float sv = at(n.b).value.data[0];
            auto& gx = grad_buf(n.a);
            auto& gs = grad_buf(n.b);
            double acc = 0.0;
            for (size_t j = 0; j < g.size(); ++j) {
                gx[j] += g[j] * sv;
                acc += static_cast<double>(g[j]) * X.data[j];
            }
            gs[0] += static_cast<float>(acc);
            break;
        }
        case OpKind::ScaleConst: {
            auto& gx = grad_buf(n.a);
            for (size_t j = 0; j < g.size(); ++j) gx[j] += g[j] * n.attr;
            break;
        }
        case OpKind::Exp: {
            const Tensor& Y = n.value;
            auto& gx = grad_buf(n.a);
            for (size_t j = 0; j < g.size(); ++j) gx[j] += g[j] * Y.data[j];
            break;
        }
        case OpKind::InnerProduct: {
            const Tensor& A = at(n.a).value;
            const Tensor& B = at(n.b).value;
            float gs = g[0];
            auto& ga = grad_buf(n.a);
            auto& gb = grad_buf(n.b);
            for (size_t j = 0; j < A.data.size(); ++j) {
                ga[j] += gs * B.data[j];
                gb[j] += gs * A.data[j];
            }
            break;
        }
        case OpKind::CrossEntropy:
        case OpKind::WeightedNllSum: {
            const Tensor& probs = n.aux[0];
            int t = probs.rows(), vsz = probs.cols();
            float gs = g[0];
            float denom = n.kind == OpKind::CrossEntropy ? n.attr : 1.0f;
            auto& gx = grad_buf(n.a);
            for (int r = 0; r < t; ++r) {
                float w = n.weights[static_cast<size_t>(r)];
                if (w == 0.0f) continue;
                float coef = gs * w / denom;
                const float* p = probs.data.data() + static_cast<size_t>(r) * vsz;
                float* gxr = gx.data() + static_cast<size_t>(r) * vsz;
                for (int c = 0; c < vsz; ++c) gxr[c] += coef * p[c];
                gxr[n.ids[static_cast<size_t>(r)]] -= coef;
            }
            break;
        }
    }
}

}  // namespace octofunc
