#pragma once

// Bounded-depth Dyck language: sampling with gold trees and structure
// vectors, well-nestedness checking, and the structure-disjoint split.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "groklab/data.hpp"
#include "groklab/rng.hpp"
#include "groklab/tree.hpp"
#include "groklab/vocab.hpp"

namespace groklab {

struct DyckLang {
    int n_types = 20;
    int max_depth = 10;
    Vocab vocab;
    std::vector<int32_t> open_ids;   // indexed by bracket type
    std::vector<int32_t> close_ids;

    bool is_open(int32_t id) const {
        return std::find(open_ids.begin(), open_ids.end(), id) != open_ids.end();
    }
    bool is_close(int32_t id) const {
        return std::find(close_ids.begin(), close_ids.end(), id) != close_ids.end();
    }
    int type_of(int32_t id) const {
        for (size_t t = 0; t < open_ids.size(); ++t)
            if (open_ids[t] == id || close_ids[t] == id) return static_cast<int>(t);
        throw std::out_of_range("DyckLang::type_of: not a bracket id");
    }
};

inline std::string bracket_suffix(int type) {
    if (type < 26) return std::string(1, static_cast<char>('a' + type));
    return std::to_string(type);
}

inline DyckLang make_dyck_lang(int n_types, int max_depth) {
    if (n_types < 1) throw std::invalid_argument("make_dyck_lang: n_types must be >= 1");
    if (max_depth < 1) throw std::invalid_argument("make_dyck_lang: max_depth must be >= 1");
    DyckLang d;
    d.n_types = n_types;
    d.max_depth = max_depth;
    for (int t = 0; t < n_types; ++t) {
        d.open_ids.push_back(d.vocab.add("(" + bracket_suffix(t)));
        d.close_ids.push_back(d.vocab.add(")" + bracket_suffix(t)));
    }
    return d;
}

// 0/1 open-close pattern, e.g. four opens then four closes -> "11110000".
inline std::string structure_of(const std::vector<int32_t>& tokens, const DyckLang& d) {
    std::string s;
    s.reserve(tokens.size());
    for (int32_t t : tokens) s += d.is_open(t) ? '1' : '0';
    return s;
}

// Max nesting depth if well-nested (types must match), nullopt otherwise.
inline std::optional<int> check_well_nested(const std::vector<int32_t>& tokens,
                                            const DyckLang& d) {
    std::vector<int> stack;
    int max_depth = 0;
    for (int32_t t : tokens) {
        if (d.is_open(t)) {
            stack.push_back(d.type_of(t));
            max_depth = std::max(max_depth, static_cast<int>(stack.size()));
        } else if (d.is_close(t)) {
            if (stack.empty() || stack.back() != d.type_of(t)) return std::nullopt;
            stack.pop_back();
        } else {
            return std::nullopt;
        }
    }
    if (!stack.empty()) return std::nullopt;
    return max_depth;
}

// (opener position, closer position) for every matched pair.
inline std::vector<std::pair<int, int>> matched_pairs(const std::vector<int32_t>& tokens,
                                                      const DyckLang& d) {
    std::vector<int> stack;
    std::vector<std::pair<int, int>> out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (d.is_open(tokens[i])) {
            stack.push_back(static_cast<int>(i));
        } else {
            if (stack.empty()) throw std::invalid_argument("matched_pairs: not well-nested");
            out.emplace_back(stack.back(), static_cast<int>(i));
            stack.pop_back();
        }
    }
    if (!stack.empty()) throw std::invalid_argument("matched_pairs: not well-nested");
    return out;
}

namespace detail {

inline BinaryTree fold_right(const std::vector<BinaryTree>& parts) {
    BinaryTree t = parts.back();
    for (size_t i = parts.size() - 1; i-- > 0;) t = BinaryTree::combine(parts[i], t);
    return t;
}

}  // namespace detail

// Gold tree: each matched pair (i, j) with inner constituents c1..ck becomes
// (leaf_i ((c1 (c2 ...)) leaf_j)); adjacent constituents at every level
// combine right-branching.
inline BinaryTree dyck_gold_tree(const std::vector<int32_t>& tokens, const DyckLang& d) {
    std::vector<std::vector<BinaryTree>> levels(1);
    std::vector<int> open_pos;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (d.is_open(tokens[i])) {
            open_pos.push_back(static_cast<int>(i));
            levels.emplace_back();
        } else {
            std::vector<BinaryTree> inner = std::move(levels.back());
            levels.pop_back();
            int lo = open_pos.back();
            open_pos.pop_back();
            BinaryTree right =
                inner.empty() ? BinaryTree::leaf(static_cast<int32_t>(i))
                              : BinaryTree::combine(detail::fold_right(inner),
                                                    BinaryTree::leaf(static_cast<int32_t>(i)));
            levels.back().push_back(BinaryTree::combine(BinaryTree::leaf(lo), right));
        }
    }
    if (levels.size() != 1 || levels[0].empty())
        throw std::invalid_argument("dyck_gold_tree: not well-nested");
    return detail::fold_right(levels[0]);
}

struct DyckGenConfig {
    double p_open = 0.5;   // scaled to 0 at max_depth
    double p_end = 0.1;    // stop probability at depth 0
    int max_len = 96;      // token budget; forces closing near the end
};

// One well-nested string with depth <= max_depth, bracket types uniform.
inline std::vector<int32_t> sample_dyck_string(const DyckLang& d, const DyckGenConfig& cfg,
                                               Rng& rng) {
    std::vector<int32_t> tokens;
    std::vector<int> stack;
    while (true) {
        const int remaining = cfg.max_len - static_cast<int>(tokens.size());
        const int depth = static_cast<int>(stack.size());
        if (depth == 0) {
            if (remaining < 2) break;
            if (!tokens.empty() && rng.bernoulli(cfg.p_end)) break;
        }
        const bool room = remaining >= depth + 2;
        const double p_eff =
            cfg.p_open * (1.0 - static_cast<double>(depth) / static_cast<double>(d.max_depth));
        if (depth == 0 || (room && depth < d.max_depth && rng.bernoulli(p_eff))) {
            int type = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(d.n_types)));
            stack.push_back(type);
            tokens.push_back(d.open_ids[static_cast<size_t>(type)]);
        } else {
            tokens.push_back(d.close_ids[static_cast<size_t>(stack.back())]);
            stack.pop_back();
        }
    }
    return tokens;
}

inline Example make_dyck_example(std::vector<int32_t> tokens, const DyckLang& d) {
    Example ex;
    ex.structure = structure_of(tokens, d);
    auto depth = check_well_nested(tokens, d);
    if (!depth) throw std::logic_error("make_dyck_example: sampler produced bad string");
    ex.depth = *depth;
    ex.gold_tree = dyck_gold_tree(tokens, d);
    ex.input = std::move(tokens);
    return ex;
}

inline std::vector<Example> gen_dyck(const DyckLang& d, const DyckGenConfig& cfg, int count,
                                     uint64_t rng_seed) {
    if (count < 1) throw std::invalid_argument("gen_dyck: count must be >= 1");
    Rng rng(derive_seed(rng_seed, "dyck_gen"));
    std::vector<Example> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(make_dyck_example(sample_dyck_string(d, cfg, rng), d));
    return out;
}

// Partitions the observed structure-vector universe, sending every example
// whose structure falls in the held-out set to gen; a val_fraction slice of
// the remaining examples becomes val_id.
inline DatasetSplits split_by_structure(std::vector<Example> examples, const DyckLang& d,
                                        double gen_fraction_of_structures, double val_fraction,
                                        uint64_t rng_seed) {
    std::vector<std::string> universe;
    std::set<std::string> seen;
    for (const auto& ex : examples) {
        if (seen.insert(ex.structure).second) universe.push_back(ex.structure);
    }
    if (universe.size() < 2)
        throw std::runtime_error(
            "split_by_structure: need at least 2 distinct structure vectors, found " +
            std::to_string(universe.size()) + " (structure space too small for a disjoint split)");
    size_t n_held = static_cast<size_t>(gen_fraction_of_structures *
                                        static_cast<double>(universe.size()) + 0.5);
    n_held = std::max<size_t>(1, n_held);
    if (n_held >= universe.size())
        throw std::runtime_error("split_by_structure: held-out fraction leaves no train structures");
    Rng rng(derive_seed(rng_seed, "structure_split"));
    rng.shuffle(universe);
    std::set<std::string> held(universe.begin(), universe.begin() + static_cast<int64_t>(n_held));

    DatasetSplits ds;
    ds.task = "dyck";
    ds.vocab = d.vocab;
    std::vector<Example> in_domain;
    for (auto& ex : examples) {
        if (held.count(ex.structure)) {
            ex.split = Split::gen;
            ds.gen.push_back(std::move(ex));
        } else {
            in_domain.push_back(std::move(ex));
        }
    }
    std::vector<size_t> order(in_domain.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    size_t n_val = static_cast<size_t>(val_fraction * static_cast<double>(in_domain.size()) + 0.5);
    std::set<size_t> val_idx(order.begin(), order.begin() + static_cast<int64_t>(n_val));
    for (size_t i = 0; i < in_domain.size(); ++i) {
        Example& ex = in_domain[i];
        if (val_idx.count(i)) {
            ex.split = Split::val_id;
            ds.val_id.push_back(std::move(ex));
        } else {
            ex.split = Split::train;
            ds.train.push_back(std::move(ex));
        }
    }
    return ds;
}

// Exact-count pipeline: samples the in-domain pool first, then rejection-
// samples strings with unobserved structures for the generalization set.
inline DatasetSplits gen_dyck_dataset(const DyckLang& d, const DyckGenConfig& cfg, int n_train,
                                      int n_val, int n_gen, uint64_t rng_seed) {
    if (n_train < 1 || n_val < 0 || n_gen < 1)
        throw std::invalid_argument("gen_dyck_dataset: bad counts");
    Rng rng(derive_seed(rng_seed, "dyck_dataset"));
    DatasetSplits ds;
    ds.task = "dyck";
    ds.vocab = d.vocab;

    std::set<std::string> seen;
    for (int i = 0; i < n_train + n_val; ++i) {
        Example ex = make_dyck_example(sample_dyck_string(d, cfg, rng), d);
        seen.insert(ex.structure);
        if (i < n_train) {
            ex.split = Split::train;
            ds.train.push_back(std::move(ex));
        } else {
            ex.split = Split::val_id;
            ds.val_id.push_back(std::move(ex));
        }
    }
    const int64_t max_attempts = 200ll * std::max(1, n_gen);
    int64_t attempts = 0;
    while (static_cast<int>(ds.gen.size()) < n_gen) {
        if (++attempts > max_attempts)
            throw std::runtime_error(
                "gen_dyck_dataset: structure space too small to find " + std::to_string(n_gen) +
                " structurally novel strings (got " + std::to_string(ds.gen.size()) + ")");
        Example ex = make_dyck_example(sample_dyck_string(d, cfg, rng), d);
        if (seen.count(ex.structure)) continue;
        ex.split = Split::gen;
        ds.gen.push_back(std::move(ex));
    }
    return ds;
}

}  // namespace groklab
