#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "groklab/dyck.hpp"

using namespace groklab;

TEST_CASE("structure vectors match the open/close pattern") {
    DyckLang d = make_dyck_lang(3, 10);
    // four opens then four closes, mixed types: "(({[]}))" analogue
    std::vector<int32_t> toks{d.open_ids[0], d.open_ids[0], d.open_ids[1], d.open_ids[2],
                              d.close_ids[2], d.close_ids[1], d.close_ids[0], d.close_ids[0]};
    REQUIRE(structure_of(toks, d) == "11110000");
    REQUIRE(check_well_nested(toks, d).value() == 4);

    // "()" -> "10", depth 1
    std::vector<int32_t> pair{d.open_ids[0], d.close_ids[0]};
    REQUIRE(structure_of(pair, d) == "10");
    REQUIRE(check_well_nested(pair, d).value() == 1);

    // mismatched type and unbalanced strings are rejected
    std::vector<int32_t> bad{d.open_ids[0], d.close_ids[1]};
    REQUIRE(!check_well_nested(bad, d).has_value());
    std::vector<int32_t> unbal{d.open_ids[0]};
    REQUIRE(!check_well_nested(unbal, d).has_value());
}

TEST_CASE("generated strings are well-nested with bounded depth") {
    DyckLang d = make_dyck_lang(6, 6);
    DyckGenConfig cfg;
    auto exs = gen_dyck(d, cfg, 10000, 42);
    REQUIRE(exs.size() == 10000);
    for (const auto& ex : exs) {
        auto depth = check_well_nested(ex.input, d);
        REQUIRE(depth.has_value());
        REQUIRE(*depth <= 6);
        REQUIRE(*depth == ex.depth);
        REQUIRE(static_cast<int>(ex.input.size()) <= cfg.max_len);
        REQUIRE(ex.structure == structure_of(ex.input, d));
    }
}

TEST_CASE("max_depth=2: no three consecutive unmatched openings in 10k strings") {
    DyckLang d = make_dyck_lang(4, 2);
    auto exs = gen_dyck(d, DyckGenConfig{}, 10000, 7);
    for (const auto& ex : exs) {
        int depth = 0, max_depth = 0;
        for (char c : ex.structure) {
            depth += (c == '1') ? 1 : -1;
            max_depth = std::max(max_depth, depth);
        }
        REQUIRE(max_depth <= 2);
    }
}

TEST_CASE("bracket types are roughly uniform") {
    DyckLang d = make_dyck_lang(6, 6);
    auto exs = gen_dyck(d, DyckGenConfig{}, 4000, 11);
    std::vector<int64_t> counts(6, 0);
    int64_t total = 0;
    for (const auto& ex : exs)
        for (int32_t t : ex.input)
            if (d.is_open(t)) {
                counts[static_cast<size_t>(d.type_of(t))]++;
                ++total;
            }
    for (int64_t c : counts) {
        double freq = static_cast<double>(c) / static_cast<double>(total);
        REQUIRE(freq == Catch::Approx(1.0 / 6.0).margin(0.02));
    }
}

TEST_CASE("gold trees are valid binary trees over all tokens") {
    DyckLang d = make_dyck_lang(6, 6);
    auto exs = gen_dyck(d, DyckGenConfig{}, 500, 13);
    for (const auto& ex : exs) {
        REQUIRE(ex.gold_tree.valid());
        REQUIRE(ex.gold_tree.n_leaves() == static_cast<int>(ex.input.size()));
    }
    // hand case: "(a (b )b )a" -> (0 ((1 2) 3))
    std::vector<int32_t> toks{d.open_ids[0], d.open_ids[1], d.close_ids[1], d.close_ids[0]};
    auto t = dyck_gold_tree(toks, d);
    REQUIRE(t.to_string() == "(* ((* *) *))");
    // two top-level pairs combine right-branching: "()()" -> ((0 1) (2 3))
    std::vector<int32_t> two{d.open_ids[0], d.close_ids[0], d.open_ids[1], d.close_ids[1]};
    REQUIRE(dyck_gold_tree(two, d).to_string() == "((* *) (* *))");
}

TEST_CASE("split_by_structure: held-out structures all land in gen, sets disjoint") {
    DyckLang d = make_dyck_lang(4, 4);
    auto exs = gen_dyck(d, DyckGenConfig{}, 5000, 3);
    auto ds = split_by_structure(exs, d, 0.2, 0.1, 99);
    REQUIRE(!ds.gen.empty());
    REQUIRE(!ds.train.empty());
    REQUIRE(!ds.val_id.empty());
    REQUIRE(ds.train.size() + ds.val_id.size() + ds.gen.size() == exs.size());

    std::set<std::string> train_structs, gen_structs, val_structs;
    for (const auto& e : ds.train) train_structs.insert(e.structure);
    for (const auto& e : ds.val_id) val_structs.insert(e.structure);
    for (const auto& e : ds.gen) gen_structs.insert(e.structure);
    // exact set-intersection oracle
    std::vector<std::string> inter;
    std::set_intersection(train_structs.begin(), train_structs.end(), gen_structs.begin(),
                          gen_structs.end(), std::back_inserter(inter));
    REQUIRE(inter.empty());
    // every example of a held-out structure is in gen: no gen structure
    // appears anywhere in train or val
    for (const auto& s : val_structs) REQUIRE(gen_structs.count(s) == 0);

    // too few distinct structures is a diagnostic failure
    std::vector<Example> mono;
    for (int i = 0; i < 10; ++i) {
        std::vector<int32_t> toks{d.open_ids[0], d.close_ids[0]};
        mono.push_back(make_dyck_example(toks, d));
    }
    REQUIRE_THROWS_WITH(split_by_structure(mono, d, 0.5, 0.0, 1),
                        Catch::Matchers::ContainsSubstring("distinct structure"));
}

TEST_CASE("exact-count dataset generation with disjoint gen structures") {
    DyckLang d = make_dyck_lang(6, 6);
    auto ds = gen_dyck_dataset(d, DyckGenConfig{}, 2000, 200, 200, 17);
    REQUIRE(ds.train.size() == 2000);
    REQUIRE(ds.val_id.size() == 200);
    REQUIRE(ds.gen.size() == 200);
    std::set<std::string> seen;
    for (const auto& e : ds.train) seen.insert(e.structure);
    for (const auto& e : ds.val_id) seen.insert(e.structure);
    for (const auto& e : ds.gen) REQUIRE(seen.count(e.structure) == 0);

    // a depth-1 single-type language has exactly one structure per length;
    // requesting novel structures must fail with a diagnostic
    DyckLang tiny = make_dyck_lang(1, 1);
    DyckGenConfig short_cfg;
    short_cfg.max_len = 4;
    REQUIRE_THROWS_WITH(gen_dyck_dataset(tiny, short_cfg, 200, 0, 50, 5),
                        Catch::Matchers::ContainsSubstring("structure space too small"));
}

TEST_CASE("determinism: same seed gives byte-identical serialized splits") {
    DyckLang d = make_dyck_lang(6, 6);
    auto serialize = [&](const DatasetSplits& ds) {
        std::ostringstream os;
        for (const auto& e : ds.train) os << example_to_line(e, ds.vocab) << "\n";
        for (const auto& e : ds.val_id) os << example_to_line(e, ds.vocab) << "\n";
        for (const auto& e : ds.gen) os << example_to_line(e, ds.vocab) << "\n";
        return os.str();
    };
    auto a = gen_dyck_dataset(d, DyckGenConfig{}, 500, 50, 50, 123);
    auto b = gen_dyck_dataset(d, DyckGenConfig{}, 500, 50, 50, 123);
    REQUIRE(serialize(a) == serialize(b));
    auto c = gen_dyck_dataset(d, DyckGenConfig{}, 500, 50, 50, 124);
    REQUIRE(serialize(a) != serialize(c));
}

TEST_CASE("example serialization round-trips") {
    DyckLang d = make_dyck_lang(3, 4);
    auto exs = gen_dyck(d, DyckGenConfig{}, 50, 5);
    for (auto& ex : exs) ex.split = Split::train;
    for (const auto& ex : exs) {
        std::string line = example_to_line(ex, d.vocab);
        Example back = example_from_line(line, d.vocab);
        REQUIRE(back.input == ex.input);
        REQUIRE(back.target == ex.target);
        REQUIRE(back.structure == ex.structure);
        REQUIRE(back.depth == ex.depth);
        REQUIRE(back.gold_tree == ex.gold_tree);
        REQUIRE(example_to_line(back, d.vocab) == line);
    }
}

TEST_CASE("paper-scale dyck statistics: 200k/20k/20k with disjoint structures") {
    DyckLang d = make_dyck_lang(20, 10);
    auto ds = gen_dyck_dataset(d, DyckGenConfig{}, 200000, 20000, 20000, 1);
    REQUIRE(ds.train.size() == 200000);
    REQUIRE(ds.val_id.size() == 20000);
    REQUIRE(ds.gen.size() == 20000);
    std::set<std::string> seen;
    for (const auto& e : ds.train) seen.insert(e.structure);
    for (const auto& e : ds.val_id) seen.insert(e.structure);
    for (const auto& e : ds.gen) REQUIRE(seen.count(e.structure) == 0);
}
