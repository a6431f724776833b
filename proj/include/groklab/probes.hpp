#pragma once

// Model-internal probes: normalized weight norm, attention negentropy, and
// the tree-projection metrics (span contextual invariance, minimum-SCI tree,
// tree score, bracketing F1 against gold trees).
//
// Context-free span vectors come from forward passes whose attention is
// restricted to within-span positions at the original position indices. For
// a causal LM the states of span (i, j) under that restriction depend only on
// the span start i, so one suffix pass per start yields every span at once.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "groklab/data.hpp"
#include "groklab/nn.hpp"
#include "groklab/rng.hpp"
#include "groklab/tree.hpp"

namespace groklab {

// Global L2 norm of all trainable parameters, normalized by layer count.
template <typename T>
double weight_norm(const ModelParams<T>& params) {
    double ss = 0.0;
    params.for_each([&ss](const std::string&, const Tensor<T>& t) { ss += t.sum_squares(); });
    int layers = std::max(1, params.config.n_layers);
    return std::sqrt(ss) / static_cast<double>(layers);
}

inline double row_entropy(const std::vector<float>& row) {
    double h = 0.0;
    for (double p : row)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

inline double row_entropy(const std::vector<double>& row) {
    double h = 0.0;
    for (double p : row)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

// Negative mean entropy over every captured attention row (natural log).
// One-hot rows contribute 0; rows of length 1 likewise.
template <typename T>
double attention_negentropy(const AttentionRecord<T>& rec) {
    double sum = 0.0;
    int64_t n = 0;
    for (const auto& layer : rec.layers)
        for (const auto& row : layer) {
            sum += row_entropy(row);
            ++n;
        }
    if (n == 0) throw std::invalid_argument("attention_negentropy: empty record");
    return -sum / static_cast<double>(n);
}

// Streaming accumulator for probes over many forward passes.
struct NegentropyAccum {
    double sum_entropy = 0.0;
    int64_t n_rows = 0;

    template <typename T>
    void add(const AttentionRecord<T>& rec) {
        for (const auto& layer : rec.layers)
            for (const auto& row : layer) {
                sum_entropy += row_entropy(row);
                ++n_rows;
            }
    }

    double negentropy() const {
        if (n_rows == 0) throw std::logic_error("NegentropyAccum: no rows");
        return -sum_entropy / static_cast<double>(n_rows);
    }
};

// Contextual and context-free hidden states for every span of one sentence.
template <typename T>
struct SpanVectors {
    int n = 0;
    int d = 0;
    Tensor<T> full;                  // [n, d], full-context states
    std::vector<Tensor<T>> starts;   // starts[i]: [n-i, d], attention restricted to >= i

    // Mean-pooled (contextual, context-free) pair for span [i, j].
    std::pair<std::vector<double>, std::vector<double>> vectors(int i, int j) const {
        check_span(i, j);
        std::vector<double> v(static_cast<size_t>(d), 0.0), u(static_cast<size_t>(d), 0.0);
        const Tensor<T>& sfx = starts[static_cast<size_t>(i)];
        for (int t = i; t <= j; ++t) {
            const T* fr = full.row(t);
            const T* sr = sfx.row(t - i);
            for (int e = 0; e < d; ++e) {
                v[static_cast<size_t>(e)] += fr[e];
                u[static_cast<size_t>(e)] += sr[e];
            }
        }
        double inv = 1.0 / static_cast<double>(j - i + 1);
        for (int e = 0; e < d; ++e) {
            v[static_cast<size_t>(e)] *= inv;
            u[static_cast<size_t>(e)] *= inv;
        }
        return {v, u};
    }

    // d(v, u) = 1 - cosine similarity; zero vectors give distance 1.
    double cost(int i, int j) const {
        auto [v, u] = vectors(i, j);
        double dot = 0.0, nv = 0.0, nu = 0.0;
        for (int e = 0; e < d; ++e) {
            dot += v[static_cast<size_t>(e)] * u[static_cast<size_t>(e)];
            nv += v[static_cast<size_t>(e)] * v[static_cast<size_t>(e)];
            nu += u[static_cast<size_t>(e)] * u[static_cast<size_t>(e)];
        }
        if (nv == 0.0 || nu == 0.0) {
            if (!warned_zero_) {
                std::cerr << "span cost: zero vector in cosine distance, using d=1\n";
                warned_zero_ = true;
            }
            return 1.0;
        }
        // identical vectors (e.g. spans anchored at position 0 under a causal
        // model) must give exactly 0
        if (dot == nv && dot == nu) return 0.0;
        return 1.0 - dot / (std::sqrt(nv) * std::sqrt(nu));
    }

private:
    void check_span(int i, int j) const {
        if (i < 0 || j >= n || j <= i)
            throw std::invalid_argument("SpanVectors: bad span (" + std::to_string(i) + "," +
                                        std::to_string(j) + ")");
    }

    mutable bool warned_zero_ = false;
};

// One packed forward evaluates the full pass and every suffix pass; positions
// keep their original indices.
template <typename T>
SpanVectors<T> span_vectors(const ModelParams<T>& params, const std::vector<int32_t>& sentence,
                            int layer_select = -1) {
    const int n = static_cast<int>(sentence.size());
    if (n < 2) throw std::invalid_argument("span_vectors: need at least 2 tokens");
    if (n > params.config.max_seq_len)
        throw std::invalid_argument("span_vectors: sentence longer than max_seq_len");
    if (layer_select > params.config.n_layers)
        throw std::invalid_argument("span_vectors: layer_select out of range");

    PackedBatch b;
    b.offsets.push_back(0);
    for (int start = 0; start < n; ++start) {
        for (int t = start; t < n; ++t) {
            b.tokens.push_back(sentence[static_cast<size_t>(t)]);
            b.positions.push_back(t);
        }
        b.offsets.push_back(static_cast<int32_t>(b.tokens.size()));
    }

    Tape<T> tape;
    ForwardGraph<T> g = build_forward(tape, params, b, false);
    const Tensor<T>& h = layer_select < 0
                             ? tape.value(g.final_hidden)
                             : tape.value(g.hidden[static_cast<size_t>(layer_select)]);

    SpanVectors<T> sv;
    sv.n = n;
    sv.d = params.config.d_model;
    sv.full = Tensor<T>({n, sv.d});
    std::copy(h.row(0), h.row(0) + static_cast<int64_t>(n) * sv.d, sv.full.data());
    for (int start = 0; start < n; ++start) {
        int64_t off = b.offsets[static_cast<size_t>(start)];
        int len = n - start;
        Tensor<T> s({len, sv.d});
        std::copy(h.row(off), h.row(off) + static_cast<int64_t>(len) * sv.d, s.data());
        sv.starts.push_back(std::move(s));
    }
    return sv;
}

// Cumulative span cost of a tree: sum of d(v, u) over internal-node spans.
template <typename T>
double sci(const BinaryTree& tree, const SpanVectors<T>& sv) {
    if (tree.n_leaves() != sv.n) throw std::invalid_argument("sci: tree/sentence length mismatch");
    double total = 0.0;
    for (auto [lo, hi] : tree.internal_spans()) total += sv.cost(lo, hi);
    return total;
}

// ---- minimum-SCI tree (CKY-style chart over span costs) ----

struct SciChart {
    int n = 0;
    std::vector<double> best;     // [n*n]
    std::vector<int32_t> split;   // backpointers

    double& best_at(int i, int j) { return best[static_cast<size_t>(i * n + j)]; }
    int32_t& split_at(int i, int j) { return split[static_cast<size_t>(i * n + j)]; }
};

// cost_fn(i, j) is consulted for spans of length >= 2 only. Ties between
// split points resolve to the smallest k, so flat cost charts produce the
// right-branching tree.
template <typename CostFn>
std::pair<BinaryTree, double> min_cost_tree(int n, CostFn&& cost_fn) {
    if (n < 1) throw std::invalid_argument("min_cost_tree: n must be >= 1");
    if (n == 1) return {BinaryTree::leaf(0), 0.0};
    SciChart c;
    c.n = n;
    c.best.assign(static_cast<size_t>(n) * n, 0.0);
    c.split.assign(static_cast<size_t>(n) * n, -1);
    for (int len = 2; len <= n; ++len) {
        for (int i = 0; i + len - 1 < n; ++i) {
            int j = i + len - 1;
            double best = std::numeric_limits<double>::infinity();
            int32_t arg = -1;
            for (int k = i; k < j; ++k) {
                double v = c.best_at(i, k) + c.best_at(k + 1, j);
                if (v < best) {
                    best = v;
                    arg = k;
                }
            }
            c.best_at(i, j) = best + cost_fn(i, j);
            c.split_at(i, j) = arg;
        }
    }
    // reconstruct
    std::function<BinaryTree(int, int)> rec = [&](int i, int j) -> BinaryTree {
        if (i == j) return BinaryTree::leaf(i);
        int k = c.split_at(i, j);
        return BinaryTree::combine(rec(i, k), rec(k + 1, j));
    };
    return {rec(0, n - 1), c.best_at(0, n - 1)};
}

// The binary tree minimizing cumulative SCI, with its cost.
template <typename T>
std::pair<BinaryTree, double> min_sci_tree(const SpanVectors<T>& sv) {
    // costs are reused across chart cells; precompute them once
    std::vector<double> cost(static_cast<size_t>(sv.n) * sv.n, 0.0);
    for (int i = 0; i < sv.n; ++i)
        for (int j = i + 1; j < sv.n; ++j) cost[static_cast<size_t>(i * sv.n + j)] = sv.cost(i, j);
    return min_cost_tree(sv.n, [&cost, n = sv.n](int i, int j) {
        return cost[static_cast<size_t>(i * n + j)];
    });
}

// Exact E_T[SCI(S, T)] under the uniform distribution over binary trees,
// by full enumeration; intended for n <= 10.
template <typename CostFn>
double expected_cost_exact(int n, CostFn&& cost_fn) {
    auto trees = enumerate_trees(n);
    double total = 0.0;
    for (const auto& t : trees)
        for (auto [lo, hi] : t.internal_spans()) total += cost_fn(lo, hi);
    return total / static_cast<double>(trees.size());
}

// Monte-Carlo estimate of E_T[SCI(S, T)] from uniform tree draws.
template <typename CostFn>
double expected_cost_mc(int n, CostFn&& cost_fn, int n_samples, Rng& rng) {
    double total = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        BinaryTree t = sample_uniform_tree(n, rng);
        for (auto [lo, hi] : t.internal_spans()) total += cost_fn(lo, hi);
    }
    return total / static_cast<double>(n_samples);
}

struct TreeScoreConfig {
    int n_tree_samples = 32;  // Monte-Carlo draws when enumeration is infeasible
    int exact_max_n = 8;      // exact enumeration threshold
    int layer_select = -1;    // -1: final hidden states
};

// Per-sentence tree score: E_T SCI - SCI(T_proj); nonnegative up to
// Monte-Carlo noise (exact for n <= exact_max_n).
template <typename T>
double sentence_t_score(const SpanVectors<T>& sv, const TreeScoreConfig& cfg, Rng& rng,
                        BinaryTree* proj_out = nullptr) {
    std::vector<double> cost(static_cast<size_t>(sv.n) * sv.n, 0.0);
    for (int i = 0; i < sv.n; ++i)
        for (int j = i + 1; j < sv.n; ++j) cost[static_cast<size_t>(i * sv.n + j)] = sv.cost(i, j);
    auto cost_fn = [&cost, n = sv.n](int i, int j) {
        return cost[static_cast<size_t>(i * n + j)];
    };
    auto [tree, min_cost] = min_cost_tree(sv.n, cost_fn);
    double expected = sv.n <= cfg.exact_max_n
                          ? expected_cost_exact(sv.n, cost_fn)
                          : expected_cost_mc(sv.n, cost_fn, cfg.n_tree_samples, rng);
    if (proj_out) *proj_out = std::move(tree);
    return expected - min_cost;
}

// Dataset-mean tree score over sentences.
template <typename T>
double t_score(const ModelParams<T>& params, const std::vector<std::vector<int32_t>>& sentences,
               const TreeScoreConfig& cfg, Rng& rng) {
    if (sentences.empty()) throw std::invalid_argument("t_score: empty sample");
    double total = 0.0;
    for (const auto& s : sentences) {
        auto sv = span_vectors(params, s, cfg.layer_select);
        total += sentence_t_score(sv, cfg, rng);
    }
    return total / static_cast<double>(sentences.size());
}

// PARSEVAL bracket F1 between induced tree projections and gold trees.
inline double t_parseval(const std::vector<BinaryTree>& pred_trees,
                         const std::vector<BinaryTree>& gold_trees) {
    return parseval_f1(pred_trees, gold_trees);
}

// ---- combined probe pass ----

struct ProbeConfig {
    int64_t sample_size = 10000;    // examples for attention negentropy
    int64_t tscore_sample = 10000;  // sentences for the span-pass metrics
    int probe_max_len = 32;         // skip longer sentences (span passes are O(n^2))
    TreeScoreConfig tree;
    size_t forward_batch = 32;
};

struct ProbeReport {
    int64_t step = 0;
    double weight_norm = 0.0;
    double attention_negentropy = 0.0;
    double t_score = 0.0;
    double t_parseval = 0.0;
};

// Sentence word span covered by the gold tree (excludes marker/punctuation).
inline std::vector<int32_t> probe_sentence(const Example& ex) {
    int n = ex.gold_tree.n_leaves();
    return std::vector<int32_t>(ex.input.begin(), ex.input.begin() + n);
}

// Sentences whose gold span fits the probe length budget, in sample order.
inline std::vector<const Example*> tree_probe_eligible(const std::vector<const Example*>& sample,
                                                       const ProbeConfig& cfg) {
    std::vector<const Example*> out;
    for (const Example* ex : sample) {
        if (static_cast<int64_t>(out.size()) >= cfg.tscore_sample) break;
        int n = ex->gold_tree.n_leaves();
        if (n >= 2 && n <= cfg.probe_max_len) out.push_back(ex);
    }
    return out;
}

// ent_sample feeds attention negentropy (full LM sequences); tree_sample
// feeds the span-pass tree metrics.
template <typename T>
ProbeReport probe_model(const ModelParams<T>& params, const Vocab& vocab,
                        const std::vector<const Example*>& ent_sample,
                        const std::vector<const Example*>& tree_sample, const ProbeConfig& cfg,
                        uint64_t seed, int64_t step) {
    if (ent_sample.empty()) throw std::invalid_argument("probe_model: empty sample");
    ProbeReport rep;
    rep.step = step;
    rep.weight_norm = weight_norm(params);

    NegentropyAccum acc;
    size_t n_ent = std::min(ent_sample.size(), static_cast<size_t>(cfg.sample_size));
    for (size_t start = 0; start < n_ent; start += cfg.forward_batch) {
        size_t end = std::min(n_ent, start + cfg.forward_batch);
        std::vector<std::vector<int32_t>> seqs;
        for (size_t i = start; i < end; ++i) seqs.push_back(lm_sequence(*ent_sample[i], vocab));
        Tape<T> tape;
        PackedBatch b = pack_sequences(seqs);
        AttentionRecord<T> rec;
        build_forward(tape, params, b, false, &rec);
        acc.add(rec);
    }
    rep.attention_negentropy = acc.negentropy();

    Rng rng(derive_seed(seed, "probe_trees", static_cast<uint64_t>(step)));
    std::vector<const Example*> eligible = tree_probe_eligible(tree_sample, cfg);
    if (eligible.empty()) throw std::runtime_error("probe_model: no sentence fits probe_max_len");
    std::vector<BinaryTree> proj, gold;
    double tscore_total = 0.0;
    for (const Example* ex : eligible) {
        auto sv = span_vectors(params, probe_sentence(*ex), cfg.tree.layer_select);
        BinaryTree tree;
        tscore_total += sentence_t_score(sv, cfg.tree, rng, &tree);
        proj.push_back(std::move(tree));
        gold.push_back(ex->gold_tree);
    }
    rep.t_score = tscore_total / static_cast<double>(eligible.size());
    rep.t_parseval = t_parseval(proj, gold);
    return rep;
}

// Right-branching baseline F1 on the same sentences a probe pass would use.
inline double right_branching_baseline(const std::vector<const Example*>& tree_sample,
                                       const ProbeConfig& cfg) {
    std::vector<BinaryTree> rb, gold;
    for (const Example* ex : tree_probe_eligible(tree_sample, cfg)) {
        rb.push_back(BinaryTree::right_branching(ex->gold_tree.n_leaves()));
        gold.push_back(ex->gold_tree);
    }
    if (rb.empty()) throw std::runtime_error("right_branching_baseline: empty sample");
    return parseval_f1(rb, gold);
}

}  // namespace groklab
