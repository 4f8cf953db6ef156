#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gtl/linalg.hpp"
#include "gtl/objective.hpp"
#include "gtl/tokenizer.hpp"

namespace gtl {

struct ModelConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 128;
    int d_ff = 512;
    int vocab = 259;
    int max_positions = 2048;
    uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

template <typename S>
struct LayerParams {
    vector_t<S> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    matrix_t<S> wq, wk, wv, wo;  // d_model x d_model
    matrix_t<S> w1;              // d_model x d_ff
    matrix_t<S> w2;              // d_ff x d_model
};

// Pre-norm decoder-only transformer parameters. Positions use learned
// absolute embeddings; linear layers carry no biases.
template <typename S>
struct Params {
    ModelConfig config;
    matrix_t<S> tok_embed;  // vocab x d_model
    matrix_t<S> pos_embed;  // max_positions x d_model
    std::vector<LayerParams<S>> layers;
    vector_t<S> lnf_gain, lnf_bias;
    matrix_t<S> head;  // d_model x vocab

    static Params<S> init(const ModelConfig& config);
    static Params<S> zeros_like(const Params<S>& other);

    // Applies f to every tensor in a fixed order. All traversals (optimizer
    // updates, serialization, flat indexing) share this order.
    template <class F>
    void visit(F&& f) {
        f(tok_embed);
        f(pos_embed);
        for (auto& layer : layers) {
            f(layer.ln1_gain);
            f(layer.ln1_bias);
            f(layer.wq);
            f(layer.wk);
            f(layer.wv);
            f(layer.wo);
            f(layer.ln2_gain);
            f(layer.ln2_bias);
            f(layer.w1);
            f(layer.w2);
        }
        f(lnf_gain);
        f(lnf_bias);
        f(head);
    }
    template <class F>
    void visit(F&& f) const {
        f(tok_embed);
        f(pos_embed);
        for (const auto& layer : layers) {
            f(layer.ln1_gain);
            f(layer.ln1_bias);
            f(layer.wq);
            f(layer.wk);
            f(layer.wv);
            f(layer.wo);
            f(layer.ln2_gain);
            f(layer.ln2_bias);
            f(layer.w1);
            f(layer.w2);
        }
        f(lnf_gain);
        f(lnf_bias);
        f(head);
    }

    size_t parameter_count() const;
    double get_parameter(size_t index) const;
    void add_to_parameter(size_t index, double delta);
    bool all_finite() const;

    template <typename T>
    Params<T> cast() const {
        Params<T> out;
        out.config = config;
        out.tok_embed = tok_embed.template cast<T>();
        out.pos_embed = pos_embed.template cast<T>();
        out.layers.resize(layers.size());
        for (size_t l = 0; l < layers.size(); ++l) {
            out.layers[l].ln1_gain = layers[l].ln1_gain.template cast<T>();
            out.layers[l].ln1_bias = layers[l].ln1_bias.template cast<T>();
            out.layers[l].ln2_gain = layers[l].ln2_gain.template cast<T>();
            out.layers[l].ln2_bias = layers[l].ln2_bias.template cast<T>();
            out.layers[l].wq = layers[l].wq.template cast<T>();
            out.layers[l].wk = layers[l].wk.template cast<T>();
            out.layers[l].wv = layers[l].wv.template cast<T>();
            out.layers[l].wo = layers[l].wo.template cast<T>();
            out.layers[l].w1 = layers[l].w1.template cast<T>();
            out.layers[l].w2 = layers[l].w2.template cast<T>();
        }
        out.lnf_gain = lnf_gain.template cast<T>();
        out.lnf_bias = lnf_bias.template cast<T>();
        out.head = head.template cast<T>();
        return out;
    }
};

template <typename S>
struct ForwardCache {
    std::vector<int> ids;
    std::vector<matrix_t<S>> layer_inputs;  // x entering each layer
    std::vector<matrix_t<S>> layer_mids;    // x after the attention residual
    matrix_t<S> final_input;                // x entering the final layer norm
    matrix_t<S> logits;                     // T x vocab
};

// Causal forward pass: logits at position i depend only on tokens <= i.
template <typename S>
matrix_t<S> forward(const Params<S>& params, const std::vector<int>& ids);

template <typename S>
const matrix_t<S>& forward_cached(const Params<S>& params, const std::vector<int>& ids,
                                  ForwardCache<S>& cache);

// Reverse-mode gradients of an arbitrary scalar through dlogits, added into
// grads. Internal activations are recomputed from the cached layer inputs.
template <typename S>
void backward_accumulate(const Params<S>& params, const ForwardCache<S>& cache,
                         const matrix_t<S>& dlogits, Params<S>& grads);

// Mean masked next-token loss over the batch, with gradients accumulated
// into grads (exact reverse-mode of gtl_loss). Samples must carry loss
// masks. Batch order fixes the accumulation order.
template <typename S>
double loss_and_grad(const Params<S>& params, const std::vector<const TokenizedSample*>& batch,
                     Params<S>& grads);

// Loss only, same reduction.
template <typename S>
double batch_loss(const Params<S>& params, const std::vector<const TokenizedSample*>& batch);

// Appends argmax tokens until stop_token or max_steps; the stop token is
// included in the returned sequence.
template <typename S>
std::vector<int> greedy_decode(const Params<S>& params, const std::vector<int>& prefix_ids,
                               int max_steps, int stop_token);

// Teacher-forced class probabilities: each class is scored by the summed
// log-likelihood of its verbalization tokens continuing the prefix, and the
// scores are normalized by softmax.
template <typename S>
std::vector<double> class_scores(const Params<S>& params, const std::vector<int>& prefix_ids,
                                 const std::vector<std::vector<int>>& class_verbalizations);

// Versioned binary checkpoint: config, training step, parameters, and
// optionally Adam moment estimates (little-endian raw arrays).
template <typename S>
struct Checkpoint {
    Params<S> params;
    uint64_t step = 0;
    bool has_optimizer_state = false;
    Params<S> adam_m, adam_v;
};

template <typename S>
void save_checkpoint(const std::string& path, const Checkpoint<S>& ckpt);
template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path);

}  // namespace gtl
