#include "gtl/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "gtl/common.hpp"

namespace gtl {

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || vocab < 2 || max_positions < 1)
        throw ConfigError("model config: all dimensions must be >= 1 (vocab >= 2)");
    if (d_model % n_heads != 0)
        throw ConfigError("model config: d_model must be divisible by n_heads");
}

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLnEps = 1e-5;

template <typename S>
void fill_normal(matrix_t<S>& m, Rng& rng, double std_dev) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            m(r, c) = static_cast<S>(rng.normal() * std_dev);
}

template <typename S>
S gelu(S x) {
    const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
    const S u = c * (x + static_cast<S>(0.044715) * x * x * x);
    return static_cast<S>(0.5) * x * (static_cast<S>(1) + std::tanh(u));
}

template <typename S>
S gelu_grad(S x) {
    const S c = static_cast<S>(0.7978845608028654);
    const S u = c * (x + static_cast<S>(0.044715) * x * x * x);
    const S t = std::tanh(u);
    const S du = c * (static_cast<S>(1) + static_cast<S>(3) * static_cast<S>(0.044715) * x * x);
    return static_cast<S>(0.5) * (static_cast<S>(1) + t) +
           static_cast<S>(0.5) * x * (static_cast<S>(1) - t * t) * du;
}

// Row-wise layer norm. Stats are recomputed in the backward pass.
template <typename S>
matrix_t<S> layer_norm(const matrix_t<S>& x, const vector_t<S>& gain, const vector_t<S>& bias) {
    matrix_t<S> out(x.rows(), x.cols());
    const auto d = static_cast<S>(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S mean = x.row(r).sum() / d;
        const S var = (x.row(r).array() - mean).square().sum() / d;
        const S rstd = static_cast<S>(1) / std::sqrt(var + static_cast<S>(kLnEps));
        out.row(r) =
            (((x.row(r).array() - mean) * rstd) * gain.transpose().array() + bias.transpose().array())
                .matrix();
    }
    return out;
}

template <typename S>
void layer_norm_backward(const matrix_t<S>& x, const vector_t<S>& gain, const matrix_t<S>& dout,
                         matrix_t<S>& dx_accum, vector_t<S>& dgain, vector_t<S>& dbias) {
    const auto d = static_cast<S>(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const S mean = x.row(r).sum() / d;
        const S var = (x.row(r).array() - mean).square().sum() / d;
        const S rstd = static_cast<S>(1) / std::sqrt(var + static_cast<S>(kLnEps));
        Eigen::Array<S, 1, Eigen::Dynamic> xhat = (x.row(r).array() - mean) * rstd;
        Eigen::Array<S, 1, Eigen::Dynamic> dy = dout.row(r).array();
        dgain.array() += (dy * xhat).transpose();
        dbias.array() += dy.transpose();
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat = dy * gain.transpose().array();
        const S m1 = dxhat.sum() / d;
        const S m2 = (dxhat * xhat).sum() / d;
        dx_accum.row(r).array() += rstd * (dxhat - m1 - xhat * m2);
    }
}

// Causal multi-head self-attention on the normed input. Returns the output
// of the Wo projection; q/k/v and the per-head softmax are recomputed by the
// backward pass from the same normed input.
template <typename S>
matrix_t<S> attention_forward(const LayerParams<S>& layer, const matrix_t<S>& normed, int n_heads) {
    const Eigen::Index t_len = normed.rows();
    const Eigen::Index d = normed.cols();
    const Eigen::Index dh = d / n_heads;
    const S scale = static_cast<S>(1) / std::sqrt(static_cast<S>(dh));
    const S neg_inf = -std::numeric_limits<S>::infinity();

    matrix_t<S> q = normed * layer.wq;
    matrix_t<S> k = normed * layer.wk;
    matrix_t<S> v = normed * layer.wv;
    matrix_t<S> mixed(t_len, d);
    for (int h = 0; h < n_heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        matrix_t<S> scores = qh * kh.transpose() * scale;
        for (Eigen::Index i = 0; i < t_len; ++i)
            for (Eigen::Index j = i + 1; j < t_len; ++j) scores(i, j) = neg_inf;
        for (Eigen::Index i = 0; i < t_len; ++i) {
            const S row_max = scores.row(i).maxCoeff();
            Eigen::Array<S, 1, Eigen::Dynamic> e = (scores.row(i).array() - row_max).exp();
            scores.row(i) = (e / e.sum()).matrix();
        }
        mixed.middleCols(h * dh, dh).noalias() = scores * vh;
    }
    return mixed * layer.wo;
}

template <typename S>
struct AttentionGrads {
    matrix_t<S> dnormed;
};

template <typename S>
AttentionGrads<S> attention_backward(const LayerParams<S>& layer, const matrix_t<S>& normed,
                                     const matrix_t<S>& dout, int n_heads,
                                     LayerParams<S>& grads) {
    const Eigen::Index t_len = normed.rows();
    const Eigen::Index d = normed.cols();
    const Eigen::Index dh = d / n_heads;
    const S scale = static_cast<S>(1) / std::sqrt(static_cast<S>(dh));
    const S neg_inf = -std::numeric_limits<S>::infinity();

    matrix_t<S> q = normed * layer.wq;
    matrix_t<S> k = normed * layer.wk;
    matrix_t<S> v = normed * layer.wv;

    // Recompute the pre-projection mix to get dWo, then push back per head.
    matrix_t<S> mixed(t_len, d);
    std::vector<matrix_t<S>> probs(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        matrix_t<S> scores = qh * kh.transpose() * scale;
        for (Eigen::Index i = 0; i < t_len; ++i)
            for (Eigen::Index j = i + 1; j < t_len; ++j) scores(i, j) = neg_inf;
        for (Eigen::Index i = 0; i < t_len; ++i) {
            const S row_max = scores.row(i).maxCoeff();
            Eigen::Array<S, 1, Eigen::Dynamic> e = (scores.row(i).array() - row_max).exp();
            scores.row(i) = (e / e.sum()).matrix();
        }
        mixed.middleCols(h * dh, dh).noalias() = scores * vh;
        probs[static_cast<size_t>(h)] = std::move(scores);
    }

    grads.wo.noalias() += mixed.transpose() * dout;
    matrix_t<S> dmixed = dout * layer.wo.transpose();

    matrix_t<S> dq(t_len, d), dk(t_len, d), dv(t_len, d);
    for (int h = 0; h < n_heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        const matrix_t<S>& p = probs[static_cast<size_t>(h)];
        const auto dmix_h = dmixed.middleCols(h * dh, dh);

        matrix_t<S> dp = dmix_h * vh.transpose();
        dv.middleCols(h * dh, dh).noalias() = p.transpose() * dmix_h;
        // Softmax backward per row; masked entries have p = 0, hence ds = 0.
        matrix_t<S> ds(t_len, t_len);
        for (Eigen::Index i = 0; i < t_len; ++i) {
            const S dot = (dp.row(i).array() * p.row(i).array()).sum();
            ds.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
        }
        dq.middleCols(h * dh, dh).noalias() = ds * kh * scale;
        dk.middleCols(h * dh, dh).noalias() = ds.transpose() * qh * scale;
    }

    grads.wq.noalias() += normed.transpose() * dq;
    grads.wk.noalias() += normed.transpose() * dk;
    grads.wv.noalias() += normed.transpose() * dv;

    AttentionGrads<S> out;
    out.dnormed = dq * layer.wq.transpose();
    out.dnormed.noalias() += dk * layer.wk.transpose();
    out.dnormed.noalias() += dv * layer.wv.transpose();
    return out;
}

template <typename S>
matrix_t<S> embed(const Params<S>& params, const std::vector<int>& ids) {
    const Eigen::Index t_len = static_cast<Eigen::Index>(ids.size());
    matrix_t<S> x(t_len, params.config.d_model);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const int id = ids[static_cast<size_t>(t)];
        if (id < 0 || id >= params.config.vocab)
            throw DataError("forward: token id " + std::to_string(id) + " out of vocabulary");
        x.row(t) = params.tok_embed.row(id) + params.pos_embed.row(t);
    }
    return x;
}

template <typename S>
void check_length(const Params<S>& params, size_t len) {
    if (len == 0) throw DataError("forward: empty input");
    if (len > static_cast<size_t>(params.config.max_positions))
        throw DataError("forward: sequence length " + std::to_string(len) +
                        " exceeds max_positions " + std::to_string(params.config.max_positions));
}

}  // namespace

template <typename S>
Params<S> Params<S>::init(const ModelConfig& config) {
    config.validate();
    Params<S> params;
    params.config = config;
    Rng rng(mix_seed(config.seed, "model_init"));
    params.tok_embed.resize(config.vocab, config.d_model);
    params.pos_embed.resize(config.max_positions, config.d_model);
    fill_normal(params.tok_embed, rng, kInitStd);
    fill_normal(params.pos_embed, rng, kInitStd);
    params.layers.resize(static_cast<size_t>(config.n_layers));
    for (auto& layer : params.layers) {
        layer.ln1_gain = vector_t<S>::Ones(config.d_model);
        layer.ln1_bias = vector_t<S>::Zero(config.d_model);
        layer.ln2_gain = vector_t<S>::Ones(config.d_model);
        layer.ln2_bias = vector_t<S>::Zero(config.d_model);
        layer.wq.resize(config.d_model, config.d_model);
        layer.wk.resize(config.d_model, config.d_model);
        layer.wv.resize(config.d_model, config.d_model);
        layer.wo.resize(config.d_model, config.d_model);
        layer.w1.resize(config.d_model, config.d_ff);
        layer.w2.resize(config.d_ff, config.d_model);
        fill_normal(layer.wq, rng, kInitStd);
        fill_normal(layer.wk, rng, kInitStd);
        fill_normal(layer.wv, rng, kInitStd);
        fill_normal(layer.wo, rng, kInitStd);
        fill_normal(layer.w1, rng, kInitStd);
        fill_normal(layer.w2, rng, kInitStd);
    }
    params.lnf_gain = vector_t<S>::Ones(config.d_model);
    params.lnf_bias = vector_t<S>::Zero(config.d_model);
    params.head.resize(config.d_model, config.vocab);
    fill_normal(params.head, rng, kInitStd);
    return params;
}

template <typename S>
Params<S> Params<S>::zeros_like(const Params<S>& other) {
    Params<S> params;
    params.config = other.config;
    params.tok_embed = matrix_t<S>::Zero(other.tok_embed.rows(), other.tok_embed.cols());
    params.pos_embed = matrix_t<S>::Zero(other.pos_embed.rows(), other.pos_embed.cols());
    params.layers.resize(other.layers.size());
    for (size_t l = 0; l < other.layers.size(); ++l) {
        const auto& src = other.layers[l];
        auto& dst = params.layers[l];
        dst.ln1_gain = vector_t<S>::Zero(src.ln1_gain.size());
        dst.ln1_bias = vector_t<S>::Zero(src.ln1_bias.size());
        dst.ln2_gain = vector_t<S>::Zero(src.ln2_gain.size());
        dst.ln2_bias = vector_t<S>::Zero(src.ln2_bias.size());
        dst.wq = matrix_t<S>::Zero(src.wq.rows(), src.wq.cols());
        dst.wk = matrix_t<S>::Zero(src.wk.rows(), src.wk.cols());
        dst.wv = matrix_t<S>::Zero(src.wv.rows(), src.wv.cols());
        dst.wo = matrix_t<S>::Zero(src.wo.rows(), src.wo.cols());
        dst.w1 = matrix_t<S>::Zero(src.w1.rows(), src.w1.cols());
        dst.w2 = matrix_t<S>::Zero(src.w2.rows(), src.w2.cols());
    }
    params.lnf_gain = vector_t<S>::Zero(other.lnf_gain.size());
    params.lnf_bias = vector_t<S>::Zero(other.lnf_bias.size());
    params.head = matrix_t<S>::Zero(other.head.rows(), other.head.cols());
    return params;
}

template <typename S>
size_t Params<S>::parameter_count() const {
    size_t count = 0;
    visit([&](const auto& tensor) { count += static_cast<size_t>(tensor.size()); });
    return count;
}

template <typename S>
double Params<S>::get_parameter(size_t index) const {
    double value = 0.0;
    bool found = false;
    visit([&](const auto& tensor) {
        const size_t n = static_cast<size_t>(tensor.size());
        if (!found && index < n) {
            value = static_cast<double>(tensor.data()[index]);
            found = true;
        } else if (!found) {
            index -= n;
        }
    });
    if (!found) throw ConfigError("get_parameter: index out of range");
    return value;
}

template <typename S>
void Params<S>::add_to_parameter(size_t index, double delta) {
    bool found = false;
    visit([&](auto& tensor) {
        const size_t n = static_cast<size_t>(tensor.size());
        if (!found && index < n) {
            tensor.data()[index] += static_cast<S>(delta);
            found = true;
        } else if (!found) {
            index -= n;
        }
    });
    if (!found) throw ConfigError("add_to_parameter: index out of range");
}

template <typename S>
bool Params<S>::all_finite() const {
    bool ok = true;
    visit([&](const auto& tensor) { ok = ok && tensor.allFinite(); });
    return ok;
}

template <typename S>
const matrix_t<S>& forward_cached(const Params<S>& params, const std::vector<int>& ids,
                                  ForwardCache<S>& cache) {
    check_length(params, ids.size());
    cache.ids = ids;
    cache.layer_inputs.clear();
    cache.layer_mids.clear();
    matrix_t<S> x = embed(params, ids);
    for (const auto& layer : params.layers) {
        cache.layer_inputs.push_back(x);
        x += attention_forward(layer, layer_norm(x, layer.ln1_gain, layer.ln1_bias),
                               params.config.n_heads);
        cache.layer_mids.push_back(x);
        const matrix_t<S> normed = layer_norm(x, layer.ln2_gain, layer.ln2_bias);
        matrix_t<S> hidden = normed * layer.w1;
        for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden.data()[i] = gelu(hidden.data()[i]);
        x.noalias() += hidden * layer.w2;
    }
    cache.final_input = x;
    cache.logits.noalias() =
        layer_norm(x, params.lnf_gain, params.lnf_bias) * params.head;
    return cache.logits;
}

template <typename S>
matrix_t<S> forward(const Params<S>& params, const std::vector<int>& ids) {
    check_length(params, ids.size());
    matrix_t<S> x = embed(params, ids);
    for (const auto& layer : params.layers) {
        x += attention_forward(layer, layer_norm(x, layer.ln1_gain, layer.ln1_bias),
                               params.config.n_heads);
        const matrix_t<S> normed = layer_norm(x, layer.ln2_gain, layer.ln2_bias);
        matrix_t<S> hidden = normed * layer.w1;
        for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden.data()[i] = gelu(hidden.data()[i]);
        x.noalias() += hidden * layer.w2;
    }
    return layer_norm(x, params.lnf_gain, params.lnf_bias) * params.head;
}

template <typename S>
void backward_accumulate(const Params<S>& params, const ForwardCache<S>& cache,
                         const matrix_t<S>& dlogits, Params<S>& grads) {
    const int n_heads = params.config.n_heads;

    // Final norm + head.
    const matrix_t<S> final_normed =
        layer_norm(cache.final_input, params.lnf_gain, params.lnf_bias);
    grads.head.noalias() += final_normed.transpose() * dlogits;
    const matrix_t<S> dfinal_normed = dlogits * params.head.transpose();
    matrix_t<S> dx = matrix_t<S>::Zero(cache.final_input.rows(), cache.final_input.cols());
    layer_norm_backward(cache.final_input, params.lnf_gain, dfinal_normed, dx, grads.lnf_gain,
                        grads.lnf_bias);

    for (int l = params.config.n_layers - 1; l >= 0; --l) {
        const auto& layer = params.layers[static_cast<size_t>(l)];
        auto& layer_grads = grads.layers[static_cast<size_t>(l)];
        const matrix_t<S>& x_in = cache.layer_inputs[static_cast<size_t>(l)];
        const matrix_t<S>& x_mid = cache.layer_mids[static_cast<size_t>(l)];

        // MLP backward (residual: dx flows through unchanged plus the branch).
        const matrix_t<S> normed2 = layer_norm(x_mid, layer.ln2_gain, layer.ln2_bias);
        matrix_t<S> pre_act = normed2 * layer.w1;
        matrix_t<S> activated(pre_act.rows(), pre_act.cols());
        for (Eigen::Index i = 0; i < pre_act.size(); ++i)
            activated.data()[i] = gelu(pre_act.data()[i]);
        layer_grads.w2.noalias() += activated.transpose() * dx;
        matrix_t<S> dactivated = dx * layer.w2.transpose();
        for (Eigen::Index i = 0; i < pre_act.size(); ++i)
            dactivated.data()[i] *= gelu_grad(pre_act.data()[i]);
        layer_grads.w1.noalias() += normed2.transpose() * dactivated;
        const matrix_t<S> dnormed2 = dactivated * layer.w1.transpose();
        layer_norm_backward(x_mid, layer.ln2_gain, dnormed2, dx, layer_grads.ln2_gain,
                            layer_grads.ln2_bias);

        // Attention backward.
        const matrix_t<S> normed1 = layer_norm(x_in, layer.ln1_gain, layer.ln1_bias);
        const AttentionGrads<S> att = attention_backward(layer, normed1, dx, n_heads, layer_grads);
        layer_norm_backward(x_in, layer.ln1_gain, att.dnormed, dx, layer_grads.ln1_gain,
                            layer_grads.ln1_bias);
    }

    for (Eigen::Index t = 0; t < dx.rows(); ++t) {
        grads.tok_embed.row(cache.ids[static_cast<size_t>(t)]) += dx.row(t);
        grads.pos_embed.row(t) += dx.row(t);
    }
}

namespace {

// dlogits of the per-sample masked mean cross-entropy, scaled by `weight`
// (the batch reduction factor).
template <typename S>
matrix_t<S> loss_dlogits(const matrix_t<S>& logits, const std::vector<int>& ids,
                         const LossMask& mask, double weight) {
    matrix_t<S> dlogits = matrix_t<S>::Zero(logits.rows(), logits.cols());
    const double per_position = weight / static_cast<double>(mask.supervised_count);
    for (size_t p = 0; p + 1 < ids.size(); ++p) {
        if (!mask.flags[p]) continue;
        const auto row = logits.row(static_cast<Eigen::Index>(p));
        const S max = row.maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (row.array() - max).exp();
        e /= e.sum();
        dlogits.row(static_cast<Eigen::Index>(p)) =
            (e * static_cast<S>(per_position)).matrix();
        dlogits(static_cast<Eigen::Index>(p), ids[p + 1]) -= static_cast<S>(per_position);
    }
    return dlogits;
}

LossMask mask_of(const TokenizedSample& sample) {
    if (sample.loss_mask.size() != sample.length())
        throw ConfigError("sample '" + sample.case_id + "' carries no loss mask");
    LossMask mask;
    mask.flags = sample.loss_mask;
    for (uint8_t f : mask.flags) mask.supervised_count += f;
    if (mask.supervised_count == 0)
        throw DataError("sample '" + sample.case_id + "' has zero supervised positions");
    return mask;
}

}  // namespace

template <typename S>
double loss_and_grad(const Params<S>& params, const std::vector<const TokenizedSample*>& batch,
                     Params<S>& grads) {
    if (batch.empty()) throw ConfigError("loss_and_grad: empty batch");
    const double weight = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    ForwardCache<S> cache;
    for (const TokenizedSample* sample : batch) {
        const LossMask mask = mask_of(*sample);
        const matrix_t<S>& logits = forward_cached(params, sample->token_ids, cache);
        total += gtl_loss(logits, sample->token_ids, mask) * weight;
        const matrix_t<S> dlogits = loss_dlogits(logits, sample->token_ids, mask, weight);
        backward_accumulate(params, cache, dlogits, grads);
    }
    return total;
}

template <typename S>
double batch_loss(const Params<S>& params, const std::vector<const TokenizedSample*>& batch) {
    if (batch.empty()) throw ConfigError("batch_loss: empty batch");
    double total = 0.0;
    for (const TokenizedSample* sample : batch) {
        const LossMask mask = mask_of(*sample);
        total += gtl_loss(forward(params, sample->token_ids), sample->token_ids, mask);
    }
    return total / static_cast<double>(batch.size());
}

template <typename S>
std::vector<int> greedy_decode(const Params<S>& params, const std::vector<int>& prefix_ids,
                               int max_steps, int stop_token) {
    if (max_steps < 1) throw ConfigError("greedy_decode: max_steps must be >= 1");
    std::vector<int> ids = prefix_ids;
    std::vector<int> generated;
    for (int step = 0; step < max_steps; ++step) {
        if (ids.size() + 1 > static_cast<size_t>(params.config.max_positions))
            throw DataError("greedy_decode: growth beyond max_positions");
        const matrix_t<S> logits = forward(params, ids);
        Eigen::Index best = 0;
        logits.row(logits.rows() - 1).maxCoeff(&best);
        const int token = static_cast<int>(best);
        generated.push_back(token);
        ids.push_back(token);
        if (token == stop_token) break;
    }
    return generated;
}

template <typename S>
std::vector<double> class_scores(const Params<S>& params, const std::vector<int>& prefix_ids,
                                 const std::vector<std::vector<int>>& class_verbalizations) {
    if (class_verbalizations.size() < 2)
        throw ConfigError("class_scores: need at least 2 classes");
    for (const auto& v : class_verbalizations)
        if (v.empty()) throw ConfigError("class_scores: empty class verbalization");
    const size_t prefix_len = prefix_ids.size();
    if (prefix_len == 0) throw ConfigError("class_scores: empty prefix");

    // Log-softmax of one logits row.
    auto log_prob = [](const matrix_t<S>& logits, Eigen::Index row, int token) {
        const auto r = logits.row(row);
        const S max = r.maxCoeff();
        double sum_exp = 0.0;
        for (Eigen::Index v = 0; v < r.size(); ++v)
            sum_exp += std::exp(static_cast<double>(r(v) - max));
        return static_cast<double>(r(token)) - static_cast<double>(max) - std::log(sum_exp);
    };

    std::vector<double> scores(class_verbalizations.size(), 0.0);
    // Single-token classes share one forward pass over the prefix; longer
    // verbalizations are teacher-forced with one pass each.
    matrix_t<S> base;
    bool base_ready = false;
    for (size_t c = 0; c < class_verbalizations.size(); ++c) {
        const auto& tokens = class_verbalizations[c];
        if (tokens.size() == 1) {
            if (!base_ready) {
                base = forward(params, prefix_ids);
                base_ready = true;
            }
            scores[c] = log_prob(base, static_cast<Eigen::Index>(prefix_len - 1), tokens[0]);
        } else {
            std::vector<int> ids = prefix_ids;
            ids.insert(ids.end(), tokens.begin(), tokens.end());
            const matrix_t<S> logits = forward(params, ids);
            double score = 0.0;
            for (size_t j = 0; j < tokens.size(); ++j)
                score += log_prob(logits, static_cast<Eigen::Index>(prefix_len - 1 + j), tokens[j]);
            scores[c] = score;
        }
    }

    const double max = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - max);
        sum += s;
    }
    for (double& s : scores) s /= sum;
    return scores;
}

namespace {

constexpr uint32_t kCheckpointMagic = 0x47544c46;  // "GTLF"
constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("checkpoint: truncated file");
    return value;
}

template <typename S>
void write_params(std::ostream& out, const Params<S>& params) {
    params.visit([&](const auto& tensor) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(sizeof(S) * static_cast<size_t>(tensor.size())));
    });
}

template <typename S>
void read_params(std::istream& in, Params<S>& params) {
    params.visit([&](auto& tensor) {
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(sizeof(S) * static_cast<size_t>(tensor.size())));
    });
    if (!in) throw DataError("checkpoint: truncated parameter data");
}

}  // namespace

template <typename S>
void save_checkpoint(const std::string& path, const Checkpoint<S>& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path);
    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<uint32_t>(sizeof(S)));
    const ModelConfig& c = ckpt.params.config;
    for (int v : {c.n_layers, c.n_heads, c.d_model, c.d_ff, c.vocab, c.max_positions})
        write_pod(out, static_cast<int64_t>(v));
    write_pod(out, c.seed);
    write_pod(out, ckpt.step);
    write_pod(out, static_cast<uint32_t>(ckpt.has_optimizer_state ? 1 : 0));
    write_params(out, ckpt.params);
    if (ckpt.has_optimizer_state) {
        write_params(out, ckpt.adam_m);
        write_params(out, ckpt.adam_v);
    }
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    if (read_pod<uint32_t>(in) != kCheckpointMagic)
        throw DataError("checkpoint: bad magic in " + path);
    if (read_pod<uint32_t>(in) != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version in " + path);
    if (read_pod<uint32_t>(in) != sizeof(S))
        throw DataError("checkpoint: scalar width mismatch in " + path);
    ModelConfig config;
    config.n_layers = static_cast<int>(read_pod<int64_t>(in));
    config.n_heads = static_cast<int>(read_pod<int64_t>(in));
    config.d_model = static_cast<int>(read_pod<int64_t>(in));
    config.d_ff = static_cast<int>(read_pod<int64_t>(in));
    config.vocab = static_cast<int>(read_pod<int64_t>(in));
    config.max_positions = static_cast<int>(read_pod<int64_t>(in));
    config.seed = read_pod<uint64_t>(in);
    Checkpoint<S> ckpt;
    ckpt.step = read_pod<uint64_t>(in);
    ckpt.has_optimizer_state = read_pod<uint32_t>(in) != 0;
    // Allocate with the right shapes, then overwrite with stored data.
    ModelConfig alloc = config;
    alloc.seed = 0;
    ckpt.params = Params<S>::init(alloc);
    ckpt.params.config = config;
    read_params(in, ckpt.params);
    if (ckpt.has_optimizer_state) {
        ckpt.adam_m = Params<S>::zeros_like(ckpt.params);
        ckpt.adam_v = Params<S>::zeros_like(ckpt.params);
        read_params(in, ckpt.adam_m);
        read_params(in, ckpt.adam_v);
    }
    return ckpt;
}

// Explicit instantiations: double is the reference path, float the
// downcast performance variant.
template struct Params<double>;
template struct Params<float>;
template struct Checkpoint<double>;
template struct Checkpoint<float>;

template matrix_t<double> forward(const Params<double>&, const std::vector<int>&);
template matrix_t<float> forward(const Params<float>&, const std::vector<int>&);
template const matrix_t<double>& forward_cached(const Params<double>&, const std::vector<int>&,
                                                ForwardCache<double>&);
template const matrix_t<float>& forward_cached(const Params<float>&, const std::vector<int>&,
                                               ForwardCache<float>&);
template void backward_accumulate(const Params<double>&, const ForwardCache<double>&,
                                  const matrix_t<double>&, Params<double>&);
template void backward_accumulate(const Params<float>&, const ForwardCache<float>&,
                                  const matrix_t<float>&, Params<float>&);
template double loss_and_grad(const Params<double>&, const std::vector<const TokenizedSample*>&,
                              Params<double>&);
template double loss_and_grad(const Params<float>&, const std::vector<const TokenizedSample*>&,
                              Params<float>&);
template double batch_loss(const Params<double>&, const std::vector<const TokenizedSample*>&);
template double batch_loss(const Params<float>&, const std::vector<const TokenizedSample*>&);
template std::vector<int> greedy_decode(const Params<double>&, const std::vector<int>&, int, int);
template std::vector<int> greedy_decode(const Params<float>&, const std::vector<int>&, int, int);
template std::vector<double> class_scores(const Params<double>&, const std::vector<int>&,
                                          const std::vector<std::vector<int>>&);
template std::vector<double> class_scores(const Params<float>&, const std::vector<int>&,
                                          const std::vector<std::vector<int>>&);
template void save_checkpoint(const std::string&, const Checkpoint<double>&);
template void save_checkpoint(const std::string&, const Checkpoint<float>&);
template Checkpoint<double> load_checkpoint(const std::string&);
template Checkpoint<float> load_checkpoint(const std::string&);

}  // namespace gtl
