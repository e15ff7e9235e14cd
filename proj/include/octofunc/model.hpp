#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "octofunc/autodiff.hpp"
#include "octofunc/decoder.hpp"
#include "octofunc/rng.hpp"
#include "octofunc/tensor.hpp"
#include "octofunc/tokenizer.hpp"

namespace octofunc {

// Flat row-major (y, x, channel) pixel grid, values in [0,1].
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> px;
};

struct ModelConfig {
    int d_model = 128;
    int n_layers = 4;
    int n_heads = 4;
    int context_len = 256;
    int image_size = 32;
    int image_channels = 3;
    int patch_size = 8;
    int d_img = 64;
    int n_prefix = 8;
    int enc_layers = 2;
    int enc_heads = 4;
    int vocab_size = 271;

    int n_patches() const {
        int side = image_size / patch_size;
        return side * side;
    }
    int patch_dim() const { return patch_size * patch_size * image_channels; }
    void validate() const;
};

// Named parameter tensors in a fixed registration order (also the checkpoint
// serialization order). Group names: lm, encoder, projector, contrast_head,
// temperature.
class ModelParams {
public:
    static ModelParams init(const ModelConfig& cfg, uint64_t seed);

    Tensor& get(std::string_view name);
    const Tensor& get(std::string_view name) const;
    Tensor* find(std::string_view name);

    std::vector<Tensor*> all();
    std::vector<Tensor*> group(std::string_view group_name);
    static const std::vector<std::string>& group_names();
    static std::string group_of(std::string_view param_name);

    const std::vector<std::pair<std::string, Tensor>>& named() const { return tensors_; }
    std::vector<std::pair<std::string, Tensor>>& named() { return tensors_; }

    int64_t parameter_count() const;
    const ModelConfig& config() const { return cfg_; }

    void zero_all_grads();

private:
    ModelConfig cfg_;
    std::vector<std::pair<std::string, Tensor>> tensors_;

    void add(std::string name, Tensor t) { tensors_.emplace_back(std::move(name), std::move(t)); }
};

struct GenerationConfig {
    enum class Mode { greedy, sample };
    Mode mode = Mode::greedy;
    float temperature = 1.0f;  // sampling only
    int max_new_tokens = 96;
    bool constrain = true;  // grammar-mask decoding
    void validate() const;
};

Tensor image_to_patches(const Image& img, const ModelConfig& cfg);  // [n_patches x patch_dim]

// Tape-level graph builders (training paths).
int encode_image_node(Tape& tape, ModelParams& p, const Image& img);     // [1 x d_img], unit norm
int projector_node(Tape& tape, ModelParams& p, int image_embedding);    // [n_prefix x d_model]
int encode_text_for_contrast_node(Tape& tape, ModelParams& p, std::span<const int> tokens);
// Full-length logits (prefix rows included when present); callers mask
// prefix positions out of any loss.
int lm_logits_node(Tape& tape, ModelParams& p, std::optional<int> prefix_node,
                   std::span<const int> tokens);
// Symmetric InfoNCE over the B x B cosine-similarity matrix scaled by
// 1/temperature (learnable, log-parameterized).
int contrastive_loss_node(Tape& tape, ModelParams& p, int image_embs, int text_embs);

// Inference conveniences (fresh throwaway tape inside).
Tensor encode_image(ModelParams& p, const Image& img);
Tensor image_prefix(ModelParams& p, const Image& img);  // [n_prefix x d_model]
// Logits for text positions only, shape [T x vocab].
Tensor lm_forward(ModelParams& p, const Tensor* prefix, std::span<const int> tokens);

// Autoregressive decoding; stops at <nexa_end> or max_new_tokens. With
// constrain on, each step is masked by the strict decoder for the registry.
std::vector<int> generate(ModelParams& p, const Image* pixels, std::span<const int> prompt,
                          const GenerationConfig& cfg, const Vocabulary& vocab,
                          const Registry* registry, Rng& rng);

}  // namespace octofunc
