#pragma once

// Decoder-only transformer LM: pre-norm residual blocks, learned absolute
// positions, optional tied input/output embeddings. Forward passes are built
// on the autograd tape; batches are packed (no padding) with per-sequence
// causal attention.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "groklab/autograd.hpp"
#include "groklab/rng.hpp"
#include "groklab/tensor.hpp"

namespace groklab {

constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 64;
    int d_ff = 0;  // 0 -> 4 * d_model
    int vocab_size = 0;
    int max_seq_len = 128;
    bool tie_embeddings = true;
    double dropout = 0.0;
    std::string pos_scheme = "learned";

    int ff_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }

    void validate() const {
        if (n_layers < 0) throw std::invalid_argument("ModelConfig: n_layers must be >= 0");
        if (n_heads < 1) throw std::invalid_argument("ModelConfig: n_heads must be >= 1");
        if (d_model < 1 || d_model % n_heads != 0)
            throw std::invalid_argument("ModelConfig: d_model must be divisible by n_heads");
        if (vocab_size < 1) throw std::invalid_argument("ModelConfig: vocab_size must be >= 1");
        if (max_seq_len < 1) throw std::invalid_argument("ModelConfig: max_seq_len must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0)
            throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
        if (pos_scheme != "learned")
            throw std::invalid_argument("ModelConfig: unknown positional scheme " + pos_scheme);
    }

    // Closed-form trainable parameter count.
    int64_t param_count() const {
        const int64_t d = d_model, ff = ff_dim(), v = vocab_size;
        const int64_t per_layer = 4 * d * d + 4 * d    // q,k,v,o projections + biases
                                  + (d * ff + ff)      // ffn in
                                  + (ff * d + d)       // ffn out
                                  + 4 * d;             // two layer norms
        int64_t total = v * d + max_seq_len * d + n_layers * per_layer + 2 * d + v;
        if (!tie_embeddings) total += v * d;
        return total;
    }
};

template <typename T>
struct LayerParams {
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct ModelParams {
    ModelConfig config;
    Tensor<T> tok_emb;   // [V, d]; also the output projection when tied
    Tensor<T> pos_emb;   // [max_seq_len, d]
    std::vector<LayerParams<T>> layers;
    Tensor<T> lnf_g, lnf_b;
    Tensor<T> out_bias;  // [V]
    Tensor<T> out_proj;  // [V, d], empty when tied

    // Fixed traversal order shared by the optimizer, checkpoints and probes.
    template <typename Fn>
    void for_each(Fn&& fn) {
        fn("tok_emb", tok_emb);
        fn("pos_emb", pos_emb);
        for (size_t p = 0; p < layers.size(); ++p) {
            auto& l = layers[p];
            std::string pre = "layer" + std::to_string(p) + ".";
            fn(pre + "wq", l.wq);
            fn(pre + "bq", l.bq);
            fn(pre + "wk", l.wk);
            fn(pre + "bk", l.bk);
            fn(pre + "wv", l.wv);
            fn(pre + "bv", l.bv);
            fn(pre + "wo", l.wo);
            fn(pre + "bo", l.bo);
            fn(pre + "ln1_g", l.ln1_g);
            fn(pre + "ln1_b", l.ln1_b);
            fn(pre + "ln2_g", l.ln2_g);
            fn(pre + "ln2_b", l.ln2_b);
            fn(pre + "w1", l.w1);
            fn(pre + "b1", l.b1);
            fn(pre + "w2", l.w2);
            fn(pre + "b2", l.b2);
        }
        fn("lnf_g", lnf_g);
        fn("lnf_b", lnf_b);
        fn("out_bias", out_bias);
        if (!config.tie_embeddings) fn("out_proj", out_proj);
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        const_cast<ModelParams*>(this)->for_each(
            [&fn](const std::string& name, Tensor<T>& t) { fn(name, const_cast<const Tensor<T>&>(t)); });
    }

    int64_t param_count() const {
        int64_t n = 0;
        for_each([&n](const std::string&, const Tensor<T>& t) { n += t.size(); });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each([&ok](const std::string&, const Tensor<T>& t) { ok = ok && t.all_finite(); });
        return ok;
    }
};

// Deterministic init: scaled normal (std 0.02), residual-output projections
// scaled by 1/sqrt(2L), unit layer-norm gains, zero biases.
template <typename T>
ModelParams<T> build_model(const ModelConfig& config, uint64_t rng_seed) {
    config.validate();
    ModelParams<T> m;
    m.config = config;
    Rng rng(derive_seed(rng_seed, "model_init"));
    const int64_t d = config.d_model, ff = config.ff_dim(), v = config.vocab_size;
    const T std_base = static_cast<T>(0.02);
    const T std_resid = static_cast<T>(
        0.02 / std::sqrt(2.0 * std::max(1, config.n_layers)));
    m.tok_emb = Tensor<T>::randn({v, d}, rng, std_base);
    m.pos_emb = Tensor<T>::randn({config.max_seq_len, d}, rng, std_base);
    m.layers.resize(static_cast<size_t>(config.n_layers));
    for (auto& l : m.layers) {
        l.wq = Tensor<T>::randn({d, d}, rng, std_base);
        l.bq = Tensor<T>({d});
        l.wk = Tensor<T>::randn({d, d}, rng, std_base);
        l.bk = Tensor<T>({d});
        l.wv = Tensor<T>::randn({d, d}, rng, std_base);
        l.bv = Tensor<T>({d});
        l.wo = Tensor<T>::randn({d, d}, rng, std_resid);
        l.bo = Tensor<T>({d});
        l.ln1_g = Tensor<T>::full({d}, T{1});
        l.ln1_b = Tensor<T>({d});
        l.ln2_g = Tensor<T>::full({d}, T{1});
        l.ln2_b = Tensor<T>({d});
        l.w1 = Tensor<T>::randn({d, ff}, rng, std_base);
        l.b1 = Tensor<T>({ff});
        l.w2 = Tensor<T>::randn({ff, d}, rng, std_resid);
        l.b2 = Tensor<T>({d});
    }
    m.lnf_g = Tensor<T>::full({d}, T{1});
    m.lnf_b = Tensor<T>({d});
    m.out_bias = Tensor<T>({v});
    if (!config.tie_embeddings) m.out_proj = Tensor<T>::randn({v, d}, rng, std_base);
    return m;
}

// Per-layer, per-head, per-position attention rows captured during a forward
// pass. Row order within a layer: sequence-major, then head, then position;
// row for position k holds the k+1 probabilities over positions <= k.
template <typename T>
struct AttentionRecord {
    std::vector<std::vector<std::vector<T>>> layers;
};

struct PackedBatch {
    std::vector<int32_t> tokens;
    std::vector<int32_t> positions;
    std::vector<int32_t> offsets;  // sequence s occupies [offsets[s], offsets[s+1])
    std::vector<int32_t> targets;
    std::vector<uint8_t> loss_mask;

    int64_t n_tokens() const { return static_cast<int64_t>(tokens.size()); }
    size_t n_seqs() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// Packs raw id-sequences; positions restart at 0 per sequence.
inline PackedBatch pack_sequences(const std::vector<std::vector<int32_t>>& seqs) {
    PackedBatch b;
    b.offsets.push_back(0);
    for (const auto& s : seqs) {
        for (size_t i = 0; i < s.size(); ++i) {
            b.tokens.push_back(s[i]);
            b.positions.push_back(static_cast<int32_t>(i));
        }
        b.offsets.push_back(static_cast<int32_t>(b.tokens.size()));
    }
    return b;
}

template <typename T>
struct ForwardGraph {
    typename Tape<T>::Ref logits = -1;
    typename Tape<T>::Ref loss = -1;
    // Leaf refs in ModelParams::for_each order, for reading gradients out.
    std::vector<typename Tape<T>::Ref> param_refs;
    // hidden[0] = embedding output, hidden[p] = residual stream after block p.
    std::vector<typename Tape<T>::Ref> hidden;
    typename Tape<T>::Ref final_hidden = -1;  // after the final layer norm
};

// Builds the forward graph for a packed batch. Dropout is applied only when
// a dropout_rng is supplied (training); capture fills an AttentionRecord.
template <typename T>
ForwardGraph<T> build_forward(Tape<T>& tape, const ModelParams<T>& params, const PackedBatch& batch,
                              bool requires_grad, AttentionRecord<T>* capture = nullptr,
                              Rng* dropout_rng = nullptr) {
    using Ref = typename Tape<T>::Ref;
    const ModelConfig& cfg = params.config;
    for (size_t s = 0; s + 1 < batch.offsets.size(); ++s) {
        int32_t len = batch.offsets[s + 1] - batch.offsets[s];
        if (len > cfg.max_seq_len)
            throw std::invalid_argument("forward: sequence longer than max_seq_len");
    }

    ForwardGraph<T> g;
    std::vector<Ref> refs;
    const_cast<ModelParams<T>&>(params).for_each([&](const std::string&, Tensor<T>& t) {
        refs.push_back(tape.leaf(t, requires_grad));
    });
    g.param_refs = refs;
    size_t idx = 0;
    auto next_ref = [&refs, &idx]() { return refs[idx++]; };

    Ref emb = next_ref();
    Ref pos = next_ref();
    const T drop = static_cast<T>(cfg.dropout);
    auto maybe_dropout = [&](Ref x) {
        return (dropout_rng && drop > T{0}) ? tape.dropout(x, drop, *dropout_rng) : x;
    };

    Ref x = tape.embedding(emb, pos, batch.tokens, batch.positions);
    if (capture) capture->layers.assign(static_cast<size_t>(cfg.n_layers), {});
    g.hidden.push_back(x);
    for (int p = 0; p < cfg.n_layers; ++p) {
        Ref wq = next_ref(), bq = next_ref(), wk = next_ref(), bk = next_ref();
        Ref wv = next_ref(), bv = next_ref(), wo = next_ref(), bo = next_ref();
        Ref ln1_g = next_ref(), ln1_b = next_ref(), ln2_g = next_ref(), ln2_b = next_ref();
        Ref w1 = next_ref(), b1 = next_ref(), w2 = next_ref(), b2 = next_ref();

        Ref h = tape.layer_norm(x, ln1_g, ln1_b, static_cast<T>(kLayerNormEps));
        Ref q = tape.add_bias(tape.matmul(h, wq), bq);
        Ref k = tape.add_bias(tape.matmul(h, wk), bk);
        Ref v = tape.add_bias(tape.matmul(h, wv), bv);
        auto* rows = capture ? &capture->layers[static_cast<size_t>(p)] : nullptr;
        Ref a = tape.causal_attention(q, k, v, batch.offsets, cfg.n_heads, rows);
        Ref attn_out = tape.add_bias(tape.matmul(a, wo), bo);
        x = tape.add(x, maybe_dropout(attn_out));

        Ref h2 = tape.layer_norm(x, ln2_g, ln2_b, static_cast<T>(kLayerNormEps));
        Ref f = tape.add_bias(tape.matmul(tape.gelu(tape.add_bias(tape.matmul(h2, w1), b1)), w2), b2);
        x = tape.add(x, maybe_dropout(f));
        g.hidden.push_back(x);
    }
    Ref lnf_g = next_ref(), lnf_b = next_ref();
    Ref hf = tape.layer_norm(x, lnf_g, lnf_b, static_cast<T>(kLayerNormEps));
    g.final_hidden = hf;
    Ref ob = next_ref();
    Ref proj = cfg.tie_embeddings ? emb : next_ref();
    g.logits = tape.add_bias(tape.matmul_transposed(hf, proj), ob);
    return g;
}

// Mean NLL of the correct continuation over unmasked positions.
template <typename T>
typename Tape<T>::Ref lm_loss(Tape<T>& tape, typename Tape<T>::Ref logits,
                              const std::vector<int32_t>& targets,
                              const std::vector<uint8_t>& loss_mask) {
    return tape.cross_entropy(logits, targets, loss_mask);
}

// Tape-free loss for hand-checks and evaluation.
template <typename T>
double lm_loss_value(const Tensor<T>& logits, const std::vector<int32_t>& targets,
                     const std::vector<uint8_t>& loss_mask) {
    Tape<T> tape;
    auto l = tape.leaf(logits, false);
    auto loss = tape.cross_entropy(l, targets, loss_mask);
    return static_cast<double>(tape.value(loss)[0]);
}

// Single-sequence forward; returns per-position logits and, when capture is
// set, the attention distributions.
template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const std::vector<int32_t>& tokens,
                  AttentionRecord<T>* capture = nullptr) {
    if (tokens.empty()) throw std::invalid_argument("forward: empty input");
    Tape<T> tape;
    PackedBatch b = pack_sequences({tokens});
    ForwardGraph<T> g = build_forward(tape, params, b, false, capture);
    return tape.value(g.logits);
}

// Packed-batch inference: per-sequence logits in one pass.
template <typename T>
std::vector<Tensor<T>> forward_logits_batch(const ModelParams<T>& params,
                                            const std::vector<std::vector<int32_t>>& seqs) {
    Tape<T> tape;
    PackedBatch b = pack_sequences(seqs);
    ForwardGraph<T> g = build_forward(tape, params, b, false);
    const Tensor<T>& all = tape.value(g.logits);
    std::vector<Tensor<T>> out;
    out.reserve(seqs.size());
    const int64_t v = all.dim(1);
    for (size_t s = 0; s + 1 < b.offsets.size(); ++s) {
        int64_t o = b.offsets[s], e = b.offsets[s + 1];
        Tensor<T> t({e - o, v});
        std::copy(all.row(o), all.row(o) + (e - o) * v, t.data());
        out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
int32_t argmax_row(const Tensor<T>& logits, int64_t row) {
    const T* r = logits.row(row);
    int32_t best = 0;
    for (int64_t j = 1; j < logits.dim(1); ++j)
        if (r[j] > r[best]) best = static_cast<int32_t>(j);
    return best;
}

// Greedy continuation of a prefix; returns generated ids (EOS included when
// emitted). Deterministic: argmax ties resolve to the lowest token id.
template <typename T>
std::vector<int32_t> greedy_decode(const ModelParams<T>& params, std::vector<int32_t> prefix,
                                   int max_len, int32_t eos_id) {
    std::vector<int32_t> generated;
    const int cap = std::min(max_len, params.config.max_seq_len);
    while (static_cast<int>(prefix.size()) < cap) {
        Tensor<T> logits = forward(params, prefix);
        int32_t tok = argmax_row(logits, logits.dim(0) - 1);
        prefix.push_back(tok);
        generated.push_back(tok);
        if (tok == eos_id) break;
    }
    return generated;
}

// Lockstep batched greedy decode (no KV cache; prefixes are re-run each step).
template <typename T>
std::vector<std::vector<int32_t>> greedy_decode_batch(const ModelParams<T>& params,
                                                      const std::vector<std::vector<int32_t>>& prefixes,
                                                      int max_len, int32_t eos_id,
                                                      size_t batch_size = 64) {
    const int cap = std::min(max_len, params.config.max_seq_len);
    std::vector<std::vector<int32_t>> out(prefixes.size());
    for (size_t start = 0; start < prefixes.size(); start += batch_size) {
        size_t end = std::min(prefixes.size(), start + batch_size);
        std::vector<std::vector<int32_t>> work(prefixes.begin() + static_cast<int64_t>(start),
                                               prefixes.begin() + static_cast<int64_t>(end));
        std::vector<bool> active(work.size(), true);
        bool any = true;
        while (any) {
            std::vector<std::vector<int32_t>> live;
            std::vector<size_t> who;
            for (size_t i = 0; i < work.size(); ++i) {
                if (active[i] && static_cast<int>(work[i].size()) < cap) {
                    live.push_back(work[i]);
                    who.push_back(i);
                } else {
                    active[i] = false;
                }
            }
            if (live.empty()) break;
            auto logits = forward_logits_batch(params, live);
            any = false;
            for (size_t i = 0; i < live.size(); ++i) {
                int32_t tok = argmax_row(logits[i], logits[i].dim(0) - 1);
                size_t w = who[i];
                work[w].push_back(tok);
                out[start + w].push_back(tok);
                if (tok == eos_id) active[w] = false;
                any = any || active[w];
            }
        }
    }
    return out;
}

template <typename T>
int32_t rank_closing_from_logits(const Tensor<T>& logits, int64_t row,
                                 const std::vector<int32_t>& close_ids) {
    const T* r = logits.row(row);
    int32_t best = -1;
    for (int32_t id : close_ids) {
        if (best < 0 || r[id] > r[best] || (r[id] == r[best] && id < best)) best = id;
    }
    if (best < 0) throw std::invalid_argument("rank_closing: empty closer set");
    return best;
}

// Argmax of next-token logits restricted to closing-bracket ids; ties break
// toward the lowest token id. The prefix must contain an unmatched opener.
template <typename T>
int32_t rank_closing(const ModelParams<T>& params, const std::vector<int32_t>& prefix,
                     const std::vector<int32_t>& open_ids, const std::vector<int32_t>& close_ids) {
    int depth = 0;
    for (int32_t t : prefix) {
        if (std::find(open_ids.begin(), open_ids.end(), t) != open_ids.end()) ++depth;
        if (std::find(close_ids.begin(), close_ids.end(), t) != close_ids.end()) --depth;
    }
    if (depth <= 0) throw std::invalid_argument("rank_closing: no open bracket in prefix");
    Tensor<T> logits = forward(params, prefix);
    return rank_closing_from_logits(logits, logits.dim(0) - 1, close_ids);
}

}  // namespace groklab
