#pragma once

// Unlabeled binary constituency trees over token positions 0..n-1, plus
// uniform sampling, exhaustive enumeration and PARSEVAL bracket F1.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "groklab/rng.hpp"

namespace groklab {

class BinaryTree {
public:
    struct Node {
        int32_t left = -1;   // child indices; -1 for leaves
        int32_t right = -1;
        int32_t lo = 0;      // inclusive token span
        int32_t hi = 0;
    };

    BinaryTree() = default;

    static BinaryTree leaf(int32_t index) {
        BinaryTree t;
        t.nodes_.push_back(Node{-1, -1, index, index});
        return t;
    }

    static BinaryTree combine(const BinaryTree& l, const BinaryTree& r) {
        if (l.empty() || r.empty()) throw std::invalid_argument("BinaryTree::combine: empty child");
        if (l.root_node().hi + 1 != r.root_node().lo)
            throw std::invalid_argument("BinaryTree::combine: spans not adjacent");
        BinaryTree t;
        t.nodes_ = l.nodes_;
        const int32_t off = static_cast<int32_t>(t.nodes_.size());
        for (Node n : r.nodes_) {
            if (n.left >= 0) n.left += off;
            if (n.right >= 0) n.right += off;
            t.nodes_.push_back(n);
        }
        t.nodes_.push_back(Node{static_cast<int32_t>(off - 1),
                                static_cast<int32_t>(t.nodes_.size() - 1), l.root_node().lo,
                                r.root_node().hi});
        return t;
    }

    // (w1 (w2 (... wn))), leaves at positions base..base+n-1
    static BinaryTree right_branching(int n, int32_t base = 0) {
        if (n < 1) throw std::invalid_argument("right_branching: n must be >= 1");
        BinaryTree t = leaf(base + n - 1);
        for (int i = n - 2; i >= 0; --i) t = combine(leaf(base + i), t);
        return t;
    }

    bool empty() const { return nodes_.empty(); }
    int32_t root() const { return static_cast<int32_t>(nodes_.size()) - 1; }
    const Node& node(int32_t i) const { return nodes_[static_cast<size_t>(i)]; }
    const Node& root_node() const { return nodes_.back(); }
    int n_leaves() const { return empty() ? 0 : root_node().hi - root_node().lo + 1; }

    // Internal-node spans (length >= 2), root included, sorted.
    std::vector<std::pair<int32_t, int32_t>> internal_spans() const {
        std::vector<std::pair<int32_t, int32_t>> s;
        for (const Node& n : nodes_)
            if (n.left >= 0) s.emplace_back(n.lo, n.hi);
        std::sort(s.begin(), s.end());
        return s;
    }

    bool operator==(const BinaryTree& other) const {
        return n_leaves() == other.n_leaves() && root_node().lo == other.root_node().lo &&
               internal_spans() == other.internal_spans();
    }

    // Leaves render as '*': n=3 right-branching -> "(* (* *))".
    std::string to_string() const {
        if (empty()) return "";
        std::string out;
        to_string_rec(root(), out);
        return out;
    }

    static BinaryTree parse(const std::string& s) {
        size_t pos = 0;
        int32_t next_leaf = 0;
        BinaryTree t = parse_rec(s, pos, next_leaf);
        skip_ws(s, pos);
        if (pos != s.size()) throw std::invalid_argument("BinaryTree::parse: trailing input");
        return t;
    }

    // Structural validity: leaves are exactly lo..hi in order, internal nodes
    // have two children with adjacent spans.
    bool valid() const {
        if (empty()) return false;
        return valid_rec(root());
    }

private:
    void to_string_rec(int32_t i, std::string& out) const {
        const Node& n = nodes_[static_cast<size_t>(i)];
        if (n.left < 0) {
            out += '*';
            return;
        }
        out += '(';
        to_string_rec(n.left, out);
        out += ' ';
        to_string_rec(n.right, out);
        out += ')';
    }

    static void skip_ws(const std::string& s, size_t& pos) {
        while (pos < s.size() && s[pos] == ' ') ++pos;
    }

    static BinaryTree parse_rec(const std::string& s, size_t& pos, int32_t& next_leaf) {
        skip_ws(s, pos);
        if (pos >= s.size()) throw std::invalid_argument("BinaryTree::parse: unexpected end");
        if (s[pos] == '*') {
            ++pos;
            return leaf(next_leaf++);
        }
        if (s[pos] != '(') throw std::invalid_argument("BinaryTree::parse: expected '(' or '*'");
        ++pos;
        BinaryTree l = parse_rec(s, pos, next_leaf);
        BinaryTree r = parse_rec(s, pos, next_leaf);
        skip_ws(s, pos);
        if (pos >= s.size() || s[pos] != ')')
            throw std::invalid_argument("BinaryTree::parse: expected ')'");
        ++pos;
        return combine(l, r);
    }

    bool valid_rec(int32_t i) const {
        const Node& n = nodes_[static_cast<size_t>(i)];
        if (n.left < 0) return n.right < 0 && n.lo == n.hi;
        const Node& l = nodes_[static_cast<size_t>(n.left)];
        const Node& r = nodes_[static_cast<size_t>(n.right)];
        return l.lo == n.lo && r.hi == n.hi && l.hi + 1 == r.lo && valid_rec(n.left) &&
               valid_rec(n.right);
    }

    std::vector<Node> nodes_;
};

// Catalan numbers as doubles (exact through C_33's precision needs; used only
// as sampling weights and enumeration counts).
inline const std::vector<double>& catalan_table(int n_max) {
    static std::vector<double> table{1.0};
    while (static_cast<int>(table.size()) <= n_max) {
        int n = static_cast<int>(table.size());
        table.push_back(table.back() * 2.0 * (2.0 * n - 1.0) / (n + 1.0));
    }
    return table;
}

inline double n_binary_trees(int n_leaves) {
    return catalan_table(std::max(0, n_leaves - 1))[static_cast<size_t>(n_leaves - 1)];
}

// Uniform draw over all binary trees with n leaves: the split point of each
// node is sampled proportionally to the Catalan product of its two sides.
inline BinaryTree sample_uniform_tree(int n, Rng& rng, int32_t base = 0) {
    if (n < 1) throw std::invalid_argument("sample_uniform_tree: n must be >= 1");
    if (n == 1) return BinaryTree::leaf(base);
    const auto& cat = catalan_table(n - 1);
    std::vector<double> w(static_cast<size_t>(n - 1));
    for (int k = 1; k <= n - 1; ++k)
        w[static_cast<size_t>(k - 1)] = cat[static_cast<size_t>(k - 1)] * cat[static_cast<size_t>(n - k - 1)];
    int k = 1 + static_cast<int>(rng.categorical(w));
    BinaryTree l = sample_uniform_tree(k, rng, base);
    BinaryTree r = sample_uniform_tree(n - k, rng, base + k);
    return BinaryTree::combine(l, r);
}

// All binary trees over n leaves (Catalan(n-1) of them); intended for n <= 10.
inline std::vector<BinaryTree> enumerate_trees(int n, int32_t base = 0) {
    if (n < 1) throw std::invalid_argument("enumerate_trees: n must be >= 1");
    if (n == 1) return {BinaryTree::leaf(base)};
    std::vector<BinaryTree> out;
    for (int k = 1; k <= n - 1; ++k) {
        auto lefts = enumerate_trees(k, base);
        auto rights = enumerate_trees(n - k, base + k);
        for (const auto& l : lefts)
            for (const auto& r : rights) out.push_back(BinaryTree::combine(l, r));
    }
    return out;
}

// Micro-averaged unlabeled bracketing F1 over spans of length >= 2 (root
// included). Lists must align and cover sentences of equal lengths pairwise.
inline double parseval_f1(const std::vector<BinaryTree>& pred, const std::vector<BinaryTree>& gold) {
    if (pred.size() != gold.size())
        throw std::invalid_argument("parseval_f1: list length mismatch");
    int64_t n_pred = 0, n_gold = 0, n_match = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].n_leaves() != gold[i].n_leaves())
            throw std::invalid_argument("parseval_f1: sentence length mismatch at " +
                                        std::to_string(i));
        auto ps = pred[i].internal_spans();
        auto gs = gold[i].internal_spans();
        n_pred += static_cast<int64_t>(ps.size());
        n_gold += static_cast<int64_t>(gs.size());
        std::vector<std::pair<int32_t, int32_t>> inter;
        std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(),
                              std::back_inserter(inter));
        n_match += static_cast<int64_t>(inter.size());
    }
    if (n_pred == 0 && n_gold == 0) return 1.0;
    if (n_pred == 0 || n_gold == 0) return 0.0;
    double p = static_cast<double>(n_match) / static_cast<double>(n_pred);
    double r = static_cast<double>(n_match) / static_cast<double>(n_gold);
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

}  // namespace groklab
