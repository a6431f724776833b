#pragma once

// Task accuracies (first word, verb inflection, closing-bracket ranking),
// grokking detection and the early-stopping gap. Each task metric has a
// generic form scored against supplied predictions (used by the rule-oracle
// tests) and a model-bound form that decodes greedily.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "groklab/data.hpp"
#include "groklab/dyck.hpp"
#include "groklab/nn.hpp"

namespace groklab {

struct EvalResult {
    int64_t step = 0;
    Split split = Split::val_id;
    int64_t n_correct = 0;
    int64_t n_examples = 0;

    double accuracy() const {
        return n_examples == 0 ? 0.0
                               : static_cast<double>(n_correct) / static_cast<double>(n_examples);
    }
};

// ---- Question-Formation: first word of the decoded question ----

// preds[i] is the predicted continuation (EOS excluded) for examples[i].
inline EvalResult qf_first_word_accuracy(const std::vector<std::vector<int32_t>>& preds,
                                         const std::vector<Example>& exs, int64_t step,
                                         Split split) {
    if (preds.size() != exs.size())
        throw std::invalid_argument("qf_first_word_accuracy: prediction/example mismatch");
    EvalResult r{step, split, 0, static_cast<int64_t>(exs.size())};
    for (size_t i = 0; i < exs.size(); ++i) {
        if (!preds[i].empty() && !exs[i].target.empty() && preds[i][0] == exs[i].target[0])
            ++r.n_correct;
    }
    return r;
}

template <typename T>
EvalResult qf_first_word_accuracy(const ModelParams<T>& params, const std::vector<Example>& exs,
                                  const Vocab& v, int64_t step, Split split,
                                  size_t batch_size = 64) {
    // the first greedily decoded token is the argmax at the prefix end
    std::vector<std::vector<int32_t>> preds(exs.size());
    for (size_t start = 0; start < exs.size(); start += batch_size) {
        size_t end = std::min(exs.size(), start + batch_size);
        std::vector<std::vector<int32_t>> prefixes;
        for (size_t i = start; i < end; ++i) prefixes.push_back(decode_prefix(exs[i], v));
        auto logits = forward_logits_batch(params, prefixes);
        for (size_t i = start; i < end; ++i) {
            preds[i] = {argmax_row(logits[i - start], logits[i - start].dim(0) - 1)};
        }
    }
    return qf_first_word_accuracy(preds, exs, step, split);
}

// ---- Tense-Inflection: target verb correctly inflected ----

inline EvalResult ti_inflection_accuracy(const std::vector<std::vector<int32_t>>& preds,
                                         const std::vector<Example>& exs, int64_t step,
                                         Split split) {
    if (preds.size() != exs.size())
        throw std::invalid_argument("ti_inflection_accuracy: prediction/example mismatch");
    EvalResult r{step, split, 0, static_cast<int64_t>(exs.size())};
    for (size_t i = 0; i < exs.size(); ++i) {
        const Example& ex = exs[i];
        if (ex.verb_index < 0) throw std::invalid_argument("ti_inflection_accuracy: no verb index");
        size_t vi = static_cast<size_t>(ex.verb_index);
        // a decode lacking the verb position counts as incorrect
        if (vi < preds[i].size() && vi < ex.target.size() && preds[i][vi] == ex.target[vi])
            ++r.n_correct;
    }
    return r;
}

template <typename T>
EvalResult ti_inflection_accuracy(const ModelParams<T>& params, const std::vector<Example>& exs,
                                  const Vocab& v, int64_t step, Split split,
                                  size_t batch_size = 64) {
    std::vector<std::vector<int32_t>> prefixes;
    prefixes.reserve(exs.size());
    int longest_target = 0;
    for (const auto& ex : exs) {
        prefixes.push_back(decode_prefix(ex, v));
        longest_target = std::max(longest_target, static_cast<int>(ex.target.size()));
    }
    int cap = params.config.max_seq_len;
    auto decoded = greedy_decode_batch(params, prefixes, cap, v.eos(), batch_size);
    for (auto& d : decoded) {
        if (!d.empty() && d.back() == v.eos()) d.pop_back();
    }
    return ti_inflection_accuracy(decoded, exs, step, split);
}

// ---- Dyck: closing-bracket ranking on long-distance prefixes ----

// Qualifying prefixes: the next token is a closer whose matching opener is at
// least min_distance tokens back.
inline std::vector<std::pair<int, int>> qualifying_pairs(const Example& ex, const DyckLang& d,
                                                         int min_distance) {
    std::vector<std::pair<int, int>> out;
    for (auto [i, j] : matched_pairs(ex.input, d))
        if (j - i >= min_distance) out.emplace_back(i, j);
    return out;
}

// rank_fn(example, closer_pos) must return the predicted closing-bracket id
// for the prefix input[0..closer_pos).
template <typename RankFn>
EvalResult dyck_closing_accuracy_by(RankFn&& rank_fn, const std::vector<Example>& exs,
                                    const DyckLang& d, int64_t step, Split split,
                                    int min_distance = 10) {
    EvalResult r{step, split, 0, 0};
    for (const auto& ex : exs) {
        for (auto [i, j] : qualifying_pairs(ex, d, min_distance)) {
            ++r.n_examples;
            if (rank_fn(ex, j) == ex.input[static_cast<size_t>(j)]) ++r.n_correct;
        }
    }
    return r;
}

// Model form: one forward per example scores all of its prefixes.
template <typename T>
EvalResult dyck_closing_accuracy(const ModelParams<T>& params, const std::vector<Example>& exs,
                                 const DyckLang& d, int64_t step, Split split,
                                 int min_distance = 10, size_t batch_size = 64) {
    EvalResult r{step, split, 0, 0};
    for (size_t start = 0; start < exs.size(); start += batch_size) {
        size_t end = std::min(exs.size(), start + batch_size);
        std::vector<std::vector<int32_t>> seqs;
        for (size_t i = start; i < end; ++i) {
            std::vector<int32_t> s{d.vocab.bos()};
            s.insert(s.end(), exs[i].input.begin(), exs[i].input.end());
            seqs.push_back(std::move(s));
        }
        auto logits = forward_logits_batch(params, seqs);
        for (size_t i = start; i < end; ++i) {
            const Example& ex = exs[i];
            for (auto [lo, j] : qualifying_pairs(ex, d, min_distance)) {
                ++r.n_examples;
                // BOS shifts positions by one: row j predicts input[j]
                int32_t pick = rank_closing_from_logits(logits[i - start], j, d.close_ids);
                if (pick == ex.input[static_cast<size_t>(j)]) ++r.n_correct;
            }
        }
    }
    return r;
}

// Ground-truth stack machine; scores 1.0 by construction.
inline int32_t dyck_oracle_closer(const Example& ex, int closer_pos, const DyckLang& d) {
    std::vector<int> stack;
    for (int t = 0; t < closer_pos; ++t) {
        int32_t id = ex.input[static_cast<size_t>(t)];
        if (d.is_open(id))
            stack.push_back(d.type_of(id));
        else
            stack.pop_back();
    }
    if (stack.empty()) throw std::logic_error("dyck_oracle_closer: no open bracket");
    return d.close_ids[static_cast<size_t>(stack.back())];
}

// ---- grokking detection and the early-stopping gap ----

struct AccPoint {
    int64_t step = 0;
    double acc = 0.0;
};

// First step at which generalization accuracy reaches the threshold; later
// dips do not retract it. Appending post-crossing entries never changes it.
inline std::optional<int64_t> detect_grokking(const std::vector<AccPoint>& gen_series,
                                              double threshold = 0.8) {
    if (gen_series.empty()) throw std::invalid_argument("detect_grokking: empty series");
    int64_t prev = -1;
    for (const auto& r : gen_series) {
        if (r.step <= prev) throw std::invalid_argument("detect_grokking: series not increasing");
        prev = r.step;
        if (r.acc >= threshold) return r.step;
    }
    return std::nullopt;
}

inline std::vector<AccPoint> to_points(const std::vector<EvalResult>& series) {
    std::vector<AccPoint> out;
    out.reserve(series.size());
    for (const auto& r : series) out.push_back({r.step, r.accuracy()});
    return out;
}

inline std::optional<int64_t> detect_grokking(const std::vector<EvalResult>& gen_series,
                                              double threshold = 0.8) {
    return detect_grokking(to_points(gen_series), threshold);
}

struct EarlyStopGap {
    int64_t earlystop_step = 0;
    double acc_at_earlystop = 0.0;  // generalization accuracy at the early stop
    double acc_at_end = 0.0;        // generalization accuracy at the final step
};

// Early stopping on in-domain validation: stop once val accuracy has failed
// to improve by at least min_delta for `patience` consecutive evaluations;
// the stop point is the best-so-far evaluation.
inline EarlyStopGap early_stop_gap(const std::vector<AccPoint>& val_series,
                                   const std::vector<AccPoint>& gen_series, int patience,
                                   double min_delta = 0.001) {
    if (val_series.size() != gen_series.size())
        throw std::invalid_argument("early_stop_gap: series not aligned");
    if (static_cast<int>(val_series.size()) <= patience)
        throw std::invalid_argument("early_stop_gap: series shorter than patience");
    for (size_t i = 0; i < val_series.size(); ++i)
        if (val_series[i].step != gen_series[i].step)
            throw std::invalid_argument("early_stop_gap: series steps differ");

    size_t best_idx = 0;
    double best_val = val_series[0].acc;
    size_t stop_idx = val_series.size() - 1;
    for (size_t i = 1; i < val_series.size(); ++i) {
        if (val_series[i].acc >= best_val + min_delta) {
            best_val = val_series[i].acc;
            best_idx = i;
        } else if (i - best_idx >= static_cast<size_t>(patience)) {
            stop_idx = best_idx;
            break;
        }
    }
    EarlyStopGap g;
    g.earlystop_step = val_series[stop_idx].step;
    g.acc_at_earlystop = gen_series[stop_idx].acc;
    g.acc_at_end = gen_series.back().acc;
    return g;
}

inline EarlyStopGap early_stop_gap(const std::vector<EvalResult>& val_series,
                                   const std::vector<EvalResult>& gen_series, int patience,
                                   double min_delta = 0.001) {
    return early_stop_gap(to_points(val_series), to_points(gen_series), patience, min_delta);
}

struct GrokSummary {
    int depth = 0;
    int seed = 0;
    std::optional<int64_t> grok_step;
    int64_t earlystop_step = 0;
    double acc_at_earlystop = 0.0;
    double acc_at_end = 0.0;
};

inline GrokSummary make_grok_summary(int depth, int seed, const std::vector<AccPoint>& val_series,
                                     const std::vector<AccPoint>& gen_series,
                                     double threshold = 0.8, int patience = 10,
                                     double min_delta = 0.001) {
    GrokSummary s;
    s.depth = depth;
    s.seed = seed;
    s.grok_step = detect_grokking(gen_series, threshold);
    if (static_cast<int>(val_series.size()) > patience) {
        EarlyStopGap g = early_stop_gap(val_series, gen_series, patience, min_delta);
        s.earlystop_step = g.earlystop_step;
        s.acc_at_earlystop = g.acc_at_earlystop;
        s.acc_at_end = g.acc_at_end;
    } else {
        s.earlystop_step = gen_series.empty() ? 0 : gen_series.back().step;
        s.acc_at_earlystop = gen_series.empty() ? 0.0 : gen_series.back().acc;
        s.acc_at_end = s.acc_at_earlystop;
    }
    return s;
}

inline GrokSummary make_grok_summary(int depth, int seed, const std::vector<EvalResult>& val_series,
                                     const std::vector<EvalResult>& gen_series,
                                     double threshold = 0.8, int patience = 10,
                                     double min_delta = 0.001) {
    return make_grok_summary(depth, seed, to_points(val_series), to_points(gen_series), threshold,
                             patience, min_delta);
}

}  // namespace groklab
