#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "groklab/grammar.hpp"
#include "groklab/metrics.hpp"

using namespace groklab;

namespace {

std::vector<EvalResult> series(const std::vector<double>& accs, int64_t step0 = 3000,
                               int64_t cadence = 3000) {
    std::vector<EvalResult> out;
    for (size_t i = 0; i < accs.size(); ++i) {
        EvalResult r;
        r.step = step0 + static_cast<int64_t>(i) * cadence;
        r.n_examples = 1000;
        r.n_correct = static_cast<int64_t>(accs[i] * 1000.0 + 0.5);
        out.push_back(r);
    }
    return out;
}

std::vector<std::vector<int32_t>> oracle_preds(const std::vector<Example>& exs, bool linear) {
    std::vector<std::vector<int32_t>> out;
    for (const auto& e : exs) out.push_back(linear ? e.linear_out : e.hier_out);
    return out;
}

}  // namespace

TEST_CASE("qf first-word accuracy separates the rule oracles") {
    auto ds = gen_question_formation(400, 100, 300, 21);
    // hierarchical oracle scores 1.0 on every split
    for (const auto* split : {&ds.train, &ds.val_id, &ds.gen}) {
        auto r = qf_first_word_accuracy(oracle_preds(*split, false), *split, 0, Split::gen);
        REQUIRE(r.accuracy() == 1.0);
        REQUIRE(r.n_examples == static_cast<int64_t>(split->size()));
    }
    // linear oracle: 1.0 in-domain, 0.0 on gen (wrong auxiliary fronted)
    REQUIRE(qf_first_word_accuracy(oracle_preds(ds.train, true), ds.train, 0, Split::train)
                .accuracy() == 1.0);
    REQUIRE(qf_first_word_accuracy(oracle_preds(ds.val_id, true), ds.val_id, 0, Split::val_id)
                .accuracy() == 1.0);
    REQUIRE(qf_first_word_accuracy(oracle_preds(ds.gen, true), ds.gen, 0, Split::gen)
                .accuracy() == 0.0);
    // empty decode counts as incorrect
    std::vector<std::vector<int32_t>> empties(ds.gen.size());
    REQUIRE(qf_first_word_accuracy(empties, ds.gen, 0, Split::gen).accuracy() == 0.0);
}

TEST_CASE("ti inflection accuracy separates the rule oracles") {
    auto ds = gen_tense_inflection(400, 100, 300, 23);
    for (const auto* split : {&ds.train, &ds.val_id, &ds.gen}) {
        auto r = ti_inflection_accuracy(oracle_preds(*split, false), *split, 0, Split::gen);
        REQUIRE(r.accuracy() == 1.0);
    }
    REQUIRE(ti_inflection_accuracy(oracle_preds(ds.train, true), ds.train, 0, Split::train)
                .accuracy() == 1.0);
    REQUIRE(ti_inflection_accuracy(oracle_preds(ds.gen, true), ds.gen, 0, Split::gen)
                .accuracy() == 0.0);
    // empty decodes lack the verb position entirely
    std::vector<std::vector<int32_t>> empties(ds.gen.size());
    REQUIRE(ti_inflection_accuracy(empties, ds.gen, 0, Split::gen).accuracy() == 0.0);
}

TEST_CASE("dyck closing accuracy: oracle, baseline, distance filter") {
    DyckLang d = make_dyck_lang(6, 6);
    auto exs = gen_dyck(d, DyckGenConfig{}, 800, 31);
    for (auto& e : exs) e.split = Split::val_id;

    // ground-truth stack machine scores 1.0
    auto oracle = [&](const Example& ex, int pos) { return dyck_oracle_closer(ex, pos, d); };
    auto r = dyck_closing_accuracy_by(oracle, exs, d, 0, Split::val_id, 10);
    REQUIRE(r.n_examples > 100);
    REQUIRE(r.accuracy() == 1.0);

    // uniform-random closer lands near 1/n_types (binomial 3-sigma band)
    Rng rng(5);
    auto random_fn = [&](const Example&, int) {
        return d.close_ids[rng.uniform_int(d.close_ids.size())];
    };
    auto rr = dyck_closing_accuracy_by(random_fn, exs, d, 0, Split::val_id, 10);
    double p = 1.0 / 6.0;
    double sigma = std::sqrt(p * (1 - p) / static_cast<double>(rr.n_examples));
    REQUIRE(rr.accuracy() == Catch::Approx(p).margin(3.0 * sigma));

    // distance filter: a pair closing < 10 tokens after opening is not scored
    // (a ... <10 tokens> ) vs a long-range pair that is
    std::vector<int32_t> toks;
    toks.push_back(d.open_ids[1]);                       // long-range opener
    for (int k = 0; k < 6; ++k) {                        // 6 short pairs inside
        toks.push_back(d.open_ids[0]);
        toks.push_back(d.close_ids[0]);
    }
    toks.push_back(d.close_ids[1]);                      // distance 13
    Example ex = make_dyck_example(toks, d);
    auto pairs = qualifying_pairs(ex, d, 10);
    REQUIRE(pairs.size() == 1);
    REQUIRE(pairs[0].first == 0);
    REQUIRE(pairs[0].second == 13);

    // model form stays within [0,1] and scores the same prefix count
    ModelConfig mc;
    mc.n_layers = 1;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.vocab_size = d.vocab.size();
    mc.max_seq_len = 100;
    auto m = build_model<float>(mc, 7);
    std::vector<Example> few(exs.begin(), exs.begin() + 50);
    auto mr = dyck_closing_accuracy(m, few, d, 0, Split::val_id, 10);
    auto orc = dyck_closing_accuracy_by(oracle, few, d, 0, Split::val_id, 10);
    REQUIRE(mr.n_examples == orc.n_examples);
    REQUIRE(mr.accuracy() >= 0.0);
    REQUIRE(mr.accuracy() <= 1.0);
}

TEST_CASE("detect_grokking finds the first crossing") {
    // [0.1, 0.5, 0.85, 0.9] at steps [3k, 6k, 9k, 12k] -> 9k
    auto s = series({0.1, 0.5, 0.85, 0.9});
    REQUIRE(detect_grokking(s, 0.8).value() == 9000);

    // all below threshold -> none
    REQUIRE(!detect_grokking(series({0.1, 0.2, 0.3}), 0.8).has_value());

    // non-monotone series crossing then dipping still reports the first crossing
    REQUIRE(detect_grokking(series({0.1, 0.82, 0.4, 0.95}), 0.8).value() == 6000);

    // appending post-crossing entries never changes the answer
    auto base = series({0.1, 0.5, 0.85});
    auto extended = series({0.1, 0.5, 0.85, 0.2, 0.99});
    REQUIRE(detect_grokking(base, 0.8) == detect_grokking(extended, 0.8));

    REQUIRE_THROWS(detect_grokking(std::vector<EvalResult>{}, 0.8));
}

TEST_CASE("early stopping gap: saturating val hides rising gen") {
    // val saturates early; gen rises from 0.35 to 0.9 afterwards
    auto val = series({0.50, 0.94, 0.94, 0.94, 0.94, 0.94, 0.94, 0.94, 0.94, 0.94});
    auto gen = series({0.10, 0.35, 0.40, 0.52, 0.60, 0.71, 0.80, 0.85, 0.88, 0.90});
    auto g = early_stop_gap(val, gen, /*patience=*/5);
    REQUIRE(g.earlystop_step == 6000);  // best val at the second evaluation
    REQUIRE(g.acc_at_earlystop == Catch::Approx(0.35));
    REQUIRE(g.acc_at_end == Catch::Approx(0.90));

    // monotone-identical val and gen: no gap
    auto both = series({0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95, 0.95});
    auto g2 = early_stop_gap(both, both, 5);
    REQUIRE(g2.acc_at_end - g2.acc_at_earlystop == Catch::Approx(0.0).margin(1e-12));

    // series shorter than patience is an error
    REQUIRE_THROWS(early_stop_gap(series({0.1, 0.2}), series({0.1, 0.2}), 5));
}

TEST_CASE("grok summary combines detection and the gap") {
    auto val = series({0.90, 0.94, 0.94, 0.94, 0.94, 0.94, 0.94, 0.94});
    auto gen = series({0.10, 0.20, 0.40, 0.60, 0.75, 0.82, 0.90, 0.95});
    auto s = make_grok_summary(4, 1, val, gen, 0.8, 4);
    REQUIRE(s.depth == 4);
    REQUIRE(s.seed == 1);
    REQUIRE(s.grok_step.value() == 18000);  // first acc >= 0.8 at index 5
    REQUIRE(s.earlystop_step == 6000);
    REQUIRE(s.acc_at_end == Catch::Approx(0.95));
}
