#include "octofunc/model.hpp"

#include <algorithm>
#include <cmath>

namespace octofunc {

void ModelConfig::validate() const {
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || context_len <= 0)
        throw Error(Errc::invalid_config, "non-positive model dimension");
    if (d_model % n_heads != 0) throw Error(Errc::invalid_config, "d_model % n_heads != 0");
    if (image_size % patch_size != 0)
        throw Error(Errc::invalid_config, "image_size % patch_size != 0");
    if (d_img % enc_heads != 0) throw Error(Errc::invalid_config, "d_img % enc_heads != 0");
    if (n_prefix < 0 || n_prefix >= context_len)
        throw Error(Errc::invalid_config, "n_prefix out of range");
    if (vocab_size <= Vocabulary::kByteRegion)
        throw Error(Errc::invalid_config, "vocab smaller than the byte region");
}

void GenerationConfig::validate() const {
    if (mode == Mode::sample && !(temperature > 0.0f))
        throw Error(Errc::invalid_config, "sampling temperature must be positive");
    if (max_new_tokens < 1) throw Error(Errc::invalid_config, "max_new_tokens must be >= 1");
}

namespace {

Tensor gaussian(Rng& rng, std::vector<int> shape, float std) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.gaussian(0.0f, std);
    return t;
}

void add_block_params(ModelParams& p, Rng& rng, const std::string& prefix, int width,
                      int n_layers_total, std::vector<std::pair<std::string, Tensor>>& out) {
    (void)p;
    constexpr float kStd = 0.02f;
    const float wo_std = kStd / std::sqrt(2.0f * static_cast<float>(n_layers_total));
    int hidden = 4 * width;
    out.emplace_back(prefix + "ln1.g", Tensor::full({width}, 1.0f));
    out.emplace_back(prefix + "ln1.b", Tensor::zeros({width}));
    out.emplace_back(prefix + "attn.wq", gaussian(rng, {width, width}, kStd));
    out.emplace_back(prefix + "attn.bq", Tensor::zeros({width}));
    out.emplace_back(prefix + "attn.wk", gaussian(rng, {width, width}, kStd));
    out.emplace_back(prefix + "attn.bk", Tensor::zeros({width}));
    out.emplace_back(prefix + "attn.wv", gaussian(rng, {width, width}, kStd));
    out.emplace_back(prefix + "attn.bv", Tensor::zeros({width}));
    out.emplace_back(prefix + "attn.wo", gaussian(rng, {width, width}, wo_std));
    out.emplace_back(prefix + "attn.bo", Tensor::zeros({width}));
    out.emplace_back(prefix + "ln2.g", Tensor::full({width}, 1.0f));
    out.emplace_back(prefix + "ln2.b", Tensor::zeros({width}));
    out.emplace_back(prefix + "mlp.w1", gaussian(rng, {width, hidden}, kStd));
    out.emplace_back(prefix + "mlp.b1", Tensor::zeros({hidden}));
    out.emplace_back(prefix + "mlp.w2", gaussian(rng, {hidden, width}, wo_std));
    out.emplace_back(prefix + "mlp.b2", Tensor::zeros({width}));
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    constexpr float kStd = 0.02f;
    ModelParams p;
    p.cfg_ = cfg;
    Rng root(seed);
    Rng rng = root.split(0x70617261);

    p.add("tok_emb", gaussian(rng, {cfg.vocab_size, cfg.d_model}, kStd));
    p.add("pos_emb", gaussian(rng, {cfg.context_len, cfg.d_model}, kStd));
    for (int i = 0; i < cfg.n_layers; ++i)
        add_block_params(p, rng, "lm." + std::to_string(i) + ".", cfg.d_model, cfg.n_layers,
                         p.tensors_);
    p.add("lm.final_ln.g", Tensor::full({cfg.d_model}, 1.0f));
    p.add("lm.final_ln.b", Tensor::zeros({cfg.d_model}));

    p.add("enc.patch_proj", gaussian(rng, {cfg.patch_dim(), cfg.d_img}, kStd));
    p.add("enc.patch_bias", Tensor::zeros({cfg.d_img}));
    p.add("enc.pos_emb", gaussian(rng, {cfg.n_patches(), cfg.d_img}, kStd));
    for (int i = 0; i < cfg.enc_layers; ++i)
        add_block_params(p, rng, "enc." + std::to_string(i) + ".", cfg.d_img, cfg.enc_layers,
                         p.tensors_);
    p.add("enc.final_ln.g", Tensor::full({cfg.d_img}, 1.0f));
    p.add("enc.final_ln.b", Tensor::zeros({cfg.d_img}));

    p.add("projector.w", gaussian(rng, {cfg.d_img, cfg.n_prefix * cfg.d_model}, kStd));
    p.add("projector.b", Tensor::zeros({cfg.n_prefix * cfg.d_model}));
    p.add("contrast.w", gaussian(rng, {cfg.d_model, cfg.d_img}, kStd));
    p.add("contrast.b", Tensor::zeros({cfg.d_img}));
    p.add("log_temp", Tensor::scalar(std::log(0.07f)));
    return p;
}

Tensor* ModelParams::find(std::string_view name) {
    for (auto& [n, t] : tensors_)
        if (n == name) return &t;
    return nullptr;
}

Tensor& ModelParams::get(std::string_view name) {
    Tensor* t = find(name);
    if (!t) throw Error(Errc::invalid_config, "no parameter '" + std::string(name) + "'");
    return *t;
}

const Tensor& ModelParams::get(std::string_view name) const {
    for (const auto& [n, t] : tensors_)
        if (n == name) return t;
    throw Error(Errc::invalid_config, "no parameter '" + std::string(name) + "'");
}

std::vector<Tensor*> ModelParams::all() {
    std::vector<Tensor*> out;
    out.reserve(tensors_.size());
    for (auto& [n, t] : tensors_) out.push_back(&t);
    return out;
}

const std::vector<std::string>& ModelParams::group_names() {
    static const std::vector<std::string> names = {"lm", "encoder", "projector", "contrast_head",
                                                   "temperature"};
    return names;
}

std::string ModelParams::group_of(std::string_view name) {
    if (name == "tok_emb" || name == "pos_emb" || name.rfind("lm.", 0) == 0) return "lm";
    if (name.rfind("enc.", 0) == 0) return "encoder";
    if (name.rfind("projector.", 0) == 0) return "projector";
    if (name.rfind("contrast.", 0) == 0) return "contrast_head";
    if (name == "log_temp") return "temperature";
    throw Error(Errc::invalid_config, "ungrouped parameter '" + std::string(name) + "'");
}

std::vector<Tensor*> ModelParams::group(std::string_view group_name) {
    bool known = false;
    for (const auto& g : group_names()) known = known || g == group_name;
    if (!known)
        throw Error(Errc::invalid_config, "unknown parameter group '" + std::string(group_name) + "'");
    std::vector<Tensor*> out;
    for (auto& [n, t] : tensors_)
        if (group_of(n) == group_name) out.push_back(&t);
    return out;
}

int64_t ModelParams::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : tensors_) n += t.numel();
    return n;
}

void ModelParams::zero_all_grads() {
    for (auto& [n, t] : tensors_) t.zero_grad();
}

Tensor image_to_patches(const Image& img, const ModelConfig& cfg) {
    if (img.h != cfg.image_size || img.w != cfg.image_size || img.c != cfg.image_channels ||
        static_cast<int>(img.px.size()) != img.h * img.w * img.c)
        throw Error(Errc::shape_mismatch, "image does not match the configured size");
    int side = cfg.image_size / cfg.patch_size;
    Tensor out = Tensor::zeros({cfg.n_patches(), cfg.patch_dim()});
    int ps = cfg.patch_size, ch = cfg.image_channels, w = cfg.image_size;
    for (int py = 0; py < side; ++py) {
        for (int px = 0; px < side; ++px) {
            float* dst = out.data.data() +
                         static_cast<size_t>(py * side + px) * cfg.patch_dim();
            int k = 0;
            for (int dy = 0; dy < ps; ++dy)
                for (int dx = 0; dx < ps; ++dx)
                    for (int c = 0; c < ch; ++c)
                        dst[k++] = img.px[static_cast<size_t>(
                            ((py * ps + dy) * w + (px * ps + dx)) * ch + c)];
        }
    }
    return out;
}

namespace {

int linear_node(Tape& t, ModelParams& p, int x, const std::string& w, const std::string& b) {
    return t.add(t.matmul(x, t.leaf(&p.get(w))), t.leaf(&p.get(b)));
}

int transformer_block_node(Tape& t, ModelParams& p, const std::string& prefix, int x, int heads,
                           bool causal) {
    int h = t.layer_norm(x, t.leaf(&p.get(prefix + "ln1.g")), t.leaf(&p.get(prefix + "ln1.b")));
    int q = linear_node(t, p, h, prefix + "attn.wq", prefix + "attn.bq");
    int k = linear_node(t, p, h, prefix + "attn.wk", prefix + "attn.bk");
    int v = linear_node(t, p, h, prefix + "attn.wv", prefix + "attn.bv");
    int a = t.scaled_dot_attention(q, k, v, heads, causal);
    int o = linear_node(t, p, a, prefix + "attn.wo", prefix + "attn.bo");
    x = t.add(x, o);
    int h2 = t.layer_norm(x, t.leaf(&p.get(prefix + "ln2.g")), t.leaf(&p.get(prefix + "ln2.b")));
    int m = t.gelu(linear_node(t, p, h2, prefix + "mlp.w1", prefix + "mlp.b1"));
    m = linear_node(t, p, m, prefix + "mlp.w2", prefix + "mlp.b2");
    return t.add(x, m);
}

int lm_trunk_node(Tape& t, ModelParams& p, int x) {
    const ModelConfig& cfg = p.config();
    for (int i = 0; i < cfg.n_layers; ++i)
        x = transformer_block_node(t, p, "lm." + std::to_string(i) + ".", x, cfg.n_heads, true);
    return t.layer_norm(x, t.leaf(&p.get("lm.final_ln.g")), t.leaf(&p.get("lm.final_ln.b")));
}

std::vector<int> iota_ids(int n, int offset = 0) {
    std::vector<int> ids(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = offset + i;
    return ids;
}

}  // namespace

int encode_image_node(Tape& t, ModelParams& p, const Image& img) {
    const ModelConfig& cfg = p.config();
    int x = t.constant(image_to_patches(img, cfg));
    x = t.add(t.matmul(x, t.leaf(&p.get("enc.patch_proj"))), t.leaf(&p.get("enc.patch_bias")));
    x = t.add(x, t.leaf(&p.get("enc.pos_emb")));
    for (int i = 0; i < cfg.enc_layers; ++i)
        x = transformer_block_node(t, p, "enc." + std::to_string(i) + ".", x, cfg.enc_heads,
                                   false);
    x = t.layer_norm(x, t.leaf(&p.get("enc.final_ln.g")), t.leaf(&p.get("enc.final_ln.b")));
    x = t.mean_rows(x);
    return t.l2_normalize_rows(x);
}

int projector_node(Tape& t, ModelParams& p, int image_embedding) {
    const ModelConfig& cfg = p.config();
    int flat = t.add(t.matmul(image_embedding, t.leaf(&p.get("projector.w"))),
                     t.leaf(&p.get("projector.b")));
    return t.reshape_rows(flat, cfg.n_prefix, cfg.d_model);
}

int encode_text_for_contrast_node(Tape& t, ModelParams& p, std::span<const int> tokens) {
    const ModelConfig& cfg = p.config();
    if (static_cast<int>(tokens.size()) > cfg.context_len)
        throw Error(Errc::context_overflow, std::to_string(tokens.size()) + " tokens");
    std::vector<int> ids(tokens.begin(), tokens.end());
    int x = t.embedding_lookup(t.leaf(&p.get("tok_emb")), ids);
    int pos = t.embedding_lookup(t.leaf(&p.get("pos_emb")),
                                 iota_ids(static_cast<int>(tokens.size())));
    x = t.add(x, pos);
    x = lm_trunk_node(t, p, x);
    x = t.mean_rows(x);
    x = t.add(t.matmul(x, t.leaf(&p.get("contrast.w"))), t.leaf(&p.get("contrast.b")));
    return t.l2_normalize_rows(x);
}

int lm_logits_node(Tape& t, ModelParams& p, std::optional<int> prefix_node,
                   std::span<const int> tokens) {
    const ModelConfig& cfg = p.config();
    int n_prefix = prefix_node ? t.value(*prefix_node).rows() : 0;
    int total = n_prefix + static_cast<int>(tokens.size());
    if (total > cfg.context_len)
        throw Error(Errc::context_overflow,
                    std::to_string(total) + " positions > " + std::to_string(cfg.context_len));
    std::vector<int> ids(tokens.begin(), tokens.end());
    int emb = t.embedding_lookup(t.leaf(&p.get("tok_emb")), ids);
    int x = prefix_node ? t.concat_rows(*prefix_node, emb) : emb;
    x = t.add(x, t.embedding_lookup(t.leaf(&p.get("pos_emb")), iota_ids(total)));
    x = lm_trunk_node(t, p, x);
    // tied LM head: logits = h * tok_emb^T
    return t.matmul(x, t.transpose(t.leaf(&p.get("tok_emb"))));
}

int contrastive_loss_node(Tape& t, ModelParams& p, int image_embs, int text_embs) {
    const Tensor& a = t.value(image_embs);
    const Tensor& b = t.value(text_embs);
    require_shape(a.same_shape(b) && a.shape.size() == 2, "contrastive batch shapes");
    int batch = a.rows();
    int inv_temp = t.exp(t.scale_const(t.leaf(&p.get("log_temp")), -1.0f));
    int sims = t.scalar_mul(t.matmul(image_embs, t.transpose(text_embs)), inv_temp);
    std::vector<int> diag = iota_ids(batch);
    std::vector<float> ones(static_cast<size_t>(batch), 1.0f);
    int i2t = t.cross_entropy(sims, diag, ones);
    int t2i = t.cross_entropy(t.transpose(sims), diag, ones);
    return t.scale_const(t.add(i2t, t2i), 0.5f);
}

Tensor encode_image(ModelParams& p, const Image& img) {
    Tape t;
    return t.value(encode_image_node(t, p, img));
}

Tensor image_prefix(ModelParams& p, const Image& img) {
    Tape t;
    return t.value(projector_node(t, p, encode_image_node(t, p, img)));
}

Tensor lm_forward(ModelParams& p, const Tensor* prefix, std::span<const int> tokens) {
    Tape t;
    std::optional<int> pre;
    if (prefix) pre = t.constant(*prefix);
    const Tensor& full = t.value(lm_logits_node(t, p, pre, tokens));
    int n_prefix = prefix ? prefix->rows() : 0;
    Tensor out = Tensor::zeros({static_cast<int>(tokens.size()), full.cols()});
    std::copy(full.data.begin() + static_cast<size_t>(n_prefix) * full.cols(), full.data.end(),
              out.data.begin());
    return out;
}

std::vector<int> generate(ModelParams& p, const Image* pixels, std::span<const int> prompt,
                          const GenerationConfig& cfg, const Vocabulary& vocab,
                          const Registry* registry, Rng& rng) {
    cfg.validate();
    const ModelConfig& mc = p.config();
    if (cfg.constrain && !registry)
        throw Error(Errc::invalid_config, "grammar-mask decoding needs a registry");

    Tensor prefix;
    bool has_prefix = pixels != nullptr;
    if (has_prefix) prefix = image_prefix(p, *pixels);
    int base = (has_prefix ? mc.n_prefix : 0) + static_cast<int>(prompt.size());
    if (base + 1 > mc.context_len)
        throw Error(Errc::context_overflow, "prompt does not fit the context window");

    std::vector<int> seq(prompt.begin(), prompt.end());
    std::vector<int> out;
    std::optional<DecoderState> st;
    if (cfg.constrain) st.emplace(vocab, registry);

    for (int step = 0; step < cfg.max_new_tokens; ++step) {
        if ((has_prefix ? mc.n_prefix : 0) + static_cast<int>(seq.size()) + 1 > mc.context_len)
            break;  // truncated at the context limit
        Tensor logits = lm_forward(p, has_prefix ? &prefix : nullptr, seq);
        int vsz = logits.cols();
        const float* row = logits.data.data() + static_cast<size_t>(logits.rows() - 1) * vsz;

        std::vector<float> scores(row, row + vsz);
        if (cfg.constrain) {
            auto mask = st->allowed_next();
            for (int i = 0; i < vsz; ++i)
                if (!mask[static_cast<size_t>(i)]) scores[static_cast<size_t>(i)] = -1e30f;
        }

        int pick = 0;
        if (cfg.mode == GenerationConfig::Mode::greedy) {
            for (int i = 1; i < vsz; ++i)
                if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(pick)]) pick = i;
        } else {
            double mx = scores[0];
            for (float s : scores) mx = std::max(mx, static_cast<double>(s));
            std::vector<float> probs(static_cast<size_t>(vsz));
            double sum = 0.0;
            for (int i = 0; i < vsz; ++i) {
                double e = std::exp((static_cast<double>(scores[static_cast<size_t>(i)]) - mx) /
                                    cfg.temperature);
                probs[static_cast<size_t>(i)] = static_cast<float>(e);
                sum += e;
            }
            (void)sum;
            pick = rng.categorical(probs.data(), vsz);
        }

        seq.push_back(pick);
        out.push_back(pick);
        if (cfg.constrain) {
            Event ev = st->feed(pick);
            if (ev.kind == EventKind::CallComplete) break;
            if (ev.kind == EventKind::ParseError) break;  // unreachable under the mask
        }
        if (pick == Vocabulary::kEnd) break;
    }
    return out;
}

}  // namespace octofunc
