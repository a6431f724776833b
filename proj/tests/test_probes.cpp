#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "groklab/grammar.hpp"
#include "groklab/probes.hpp"

using namespace groklab;

namespace {

ModelConfig probe_config(int layers, int d = 16, int vocab = 12, int max_len = 40) {
    ModelConfig c;
    c.n_layers = layers;
    c.n_heads = 2;
    c.d_model = d;
    c.vocab_size = vocab;
    c.max_seq_len = max_len;
    return c;
}

}  // namespace

TEST_CASE("weight norm: zeros, single parameter, homogeneity") {
    auto cfg = probe_config(1);
    auto m = build_model<double>(cfg, 1);
    m.for_each([](const std::string&, Tensor<double>& t) { t.fill(0.0); });
    REQUIRE(weight_norm(m) == 0.0);

    m.tok_emb[0] = 3.0;
    REQUIRE(weight_norm(m) == Catch::Approx(3.0));  // single value 3, L=1

    auto m2 = build_model<double>(cfg, 2);
    double base = weight_norm(m2);
    m2.for_each([](const std::string&, Tensor<double>& t) { t.scale_inplace(2.0); });
    REQUIRE(weight_norm(m2) == Catch::Approx(2.0 * base).epsilon(1e-12));

    // normalization by layer count
    auto deep = build_model<double>(probe_config(4), 1);
    deep.for_each([](const std::string&, Tensor<double>& t) { t.fill(0.0); });
    deep.tok_emb[0] = 8.0;
    REQUIRE(weight_norm(deep) == Catch::Approx(2.0));
}

TEST_CASE("attention negentropy: one-hot, uniform, hand-computed") {
    AttentionRecord<double> rec;
    rec.layers.resize(1);

    // all rows one-hot -> 0 (maximal sparsity)
    rec.layers[0] = {{1.0}, {0.0, 1.0}, {1.0, 0.0, 0.0}};
    REQUIRE(attention_negentropy(rec) == Catch::Approx(0.0).margin(1e-12));

    // all rows uniform over k -> -ln k
    rec.layers[0] = {{0.25, 0.25, 0.25, 0.25}};
    REQUIRE(attention_negentropy(rec) == Catch::Approx(-std::log(4.0)).margin(1e-9));

    // hand case {[1], [0.5, 0.5]} -> -(0 + ln 2) / 2
    rec.layers[0] = {{1.0}, {0.5, 0.5}};
    REQUIRE(attention_negentropy(rec) == Catch::Approx(-std::log(2.0) / 2.0).margin(1e-12));

    // bounded in [-ln(max_len), 0] on a real model
    auto m = build_model<float>(probe_config(2), 3);
    AttentionRecord<float> real;
    forward(m, std::vector<int32_t>{1, 2, 3, 4, 5, 6, 7}, &real);
    double ne = attention_negentropy(real);
    REQUIRE(ne <= 0.0);
    REQUIRE(ne >= -std::log(7.0));
}

TEST_CASE("span vectors: span counts and whole-sentence identity") {
    auto m = build_model<float>(probe_config(2), 5);
    // n=2: exactly one span (0,1)
    auto sv2 = span_vectors(m, std::vector<int32_t>{3, 4});
    REQUIRE(sv2.n == 2);
    REQUIRE_THROWS(sv2.cost(0, 0));
    REQUIRE(std::isfinite(sv2.cost(0, 1)));

    // n=5: 10 contiguous spans of length >= 2
    auto sv5 = span_vectors(m, std::vector<int32_t>{3, 4, 5, 6, 7});
    int count = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) ++count;
    REQUIRE(count == 10);

    // spans anchored at the sentence start: masking is a no-op under a causal
    // model, so the contextual and context-free vectors coincide exactly
    for (int j = 1; j < 5; ++j) REQUIRE(sv5.cost(0, j) == 0.0);

    REQUIRE_THROWS(span_vectors(m, std::vector<int32_t>{1}));
}

TEST_CASE("sci sums internal-node span costs") {
    auto m = build_model<float>(probe_config(2), 7);
    std::vector<int32_t> sent{1, 2, 3};
    auto sv = span_vectors(m, sent);
    // n=3: both trees, hand-assembled
    auto rb = BinaryTree::right_branching(3);
    auto lb = BinaryTree::combine(BinaryTree::combine(BinaryTree::leaf(0), BinaryTree::leaf(1)),
                                  BinaryTree::leaf(2));
    REQUIRE(sci(rb, sv) == Catch::Approx(sv.cost(1, 2) + sv.cost(0, 2)).margin(1e-12));
    REQUIRE(sci(lb, sv) == Catch::Approx(sv.cost(0, 1) + sv.cost(0, 2)).margin(1e-12));

    // n=2: SCI of the unique tree is the single span cost
    auto sv2 = span_vectors(m, std::vector<int32_t>{4, 5});
    REQUIRE(sci(BinaryTree::right_branching(2), sv2) == Catch::Approx(sv2.cost(0, 1)));
}

TEST_CASE("min-cost tree equals brute force over all trees for n <= 8") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 2 + static_cast<int>(rng.uniform_int(7));  // 2..8
        std::vector<double> cost(static_cast<size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) cost[static_cast<size_t>(i * n + j)] = rng.uniform();
        auto cost_fn = [&](int i, int j) { return cost[static_cast<size_t>(i * n + j)]; };

        auto [tree, got] = min_cost_tree(n, cost_fn);
        REQUIRE(tree.valid());
        REQUIRE(tree.n_leaves() == n);

        double brute = std::numeric_limits<double>::infinity();
        for (const auto& t : enumerate_trees(n)) {
            double c = 0.0;
            for (auto [lo, hi] : t.internal_spans()) c += cost_fn(lo, hi);
            brute = std::min(brute, c);
        }
        REQUIRE(got == Catch::Approx(brute).margin(1e-9));
        // the returned tree actually achieves the cost
        double check = 0.0;
        for (auto [lo, hi] : tree.internal_spans()) check += cost_fn(lo, hi);
        REQUIRE(check == Catch::Approx(got).margin(1e-12));
    }
}

TEST_CASE("flat cost charts tie-break to the right-branching tree") {
    // binary-exact costs keep the cumulative sums exactly tied at every split
    for (double c : {0.5, 1.0, 2.0}) {
        for (int n : {2, 3, 5, 8, 12}) {
            auto [tree, cost] = min_cost_tree(n, [c](int, int) { return c; });
            REQUIRE(tree == BinaryTree::right_branching(n));
            REQUIRE(cost == Catch::Approx(c * (n - 1)));
        }
    }
}

TEST_CASE("tree score: nonnegative with exact expectation, MC within 3 SE") {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform_int(6));  // 3..8
        std::vector<double> cost(static_cast<size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) cost[static_cast<size_t>(i * n + j)] = rng.uniform();
        auto cost_fn = [&](int i, int j) { return cost[static_cast<size_t>(i * n + j)]; };
        double exact = expected_cost_exact(n, cost_fn);
        auto [tree, mn] = min_cost_tree(n, cost_fn);
        REQUIRE(exact - mn >= -1e-12);

        // MC estimate with per-draw variance
        const int draws = 2000;
        std::vector<double> vals;
        for (int k = 0; k < draws; ++k) {
            auto t = sample_uniform_tree(n, rng);
            double c = 0.0;
            for (auto [lo, hi] : t.internal_spans()) c += cost_fn(lo, hi);
            vals.push_back(c);
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= draws;
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= (draws - 1);
        double se = std::sqrt(var / draws);
        REQUIRE(std::abs(mean - exact) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("a context-insensitive model has t_score exactly 0") {
    // with no attention layers the hidden state of a token never depends on
    // its context, so contextual and context-free vectors coincide
    auto m = build_model<float>(probe_config(0), 11);
    Rng rng(1);
    std::vector<std::vector<int32_t>> sents{{1, 2, 3, 4}, {5, 6, 7}, {8, 9, 10, 11, 1}};
    TreeScoreConfig cfg;
    REQUIRE(t_score(m, sents, cfg, rng) == 0.0);
}

TEST_CASE("probe_model produces a full report on a QF sample") {
    QfTask qf;
    auto ds = qf.generate(64, 0, 0, 5);
    ModelConfig mc = probe_config(2, 16, qf.vocab().size(), 64);
    auto m = build_model<float>(mc, 9);
    std::vector<const Example*> sample;
    for (const auto& e : ds.train) sample.push_back(&e);
    ProbeConfig pc;
    pc.sample_size = 32;
    pc.tscore_sample = 8;
    auto rep = probe_model(m, qf.vocab(), sample, sample, pc, 123, 3000);
    REQUIRE(rep.step == 3000);
    REQUIRE(rep.weight_norm > 0.0);
    REQUIRE(rep.attention_negentropy <= 0.0);
    REQUIRE(rep.attention_negentropy >= -std::log(64.0));
    REQUIRE(std::isfinite(rep.t_score));
    REQUIRE(rep.t_parseval >= 0.0);
    REQUIRE(rep.t_parseval <= 1.0);

    double rb = right_branching_baseline(sample, pc);
    REQUIRE(rb >= 0.0);
    REQUIRE(rb <= 1.0);

    // determinism: same checkpoint, same seed, same report
    auto rep2 = probe_model(m, qf.vocab(), sample, sample, pc, 123, 3000);
    REQUIRE(rep.t_score == rep2.t_score);
    REQUIRE(rep.t_parseval == rep2.t_parseval);
    REQUIRE(rep.attention_negentropy == rep2.attention_negentropy);
}
