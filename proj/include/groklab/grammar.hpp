#pragma once

// The two ambiguous seq2seq tasks, realized over compact hand-written CFGs:
//
//   Question-Formation: declarative + QUEST -> yes/no question. The linear
//   rule fronts the linearly-first auxiliary; the hierarchical rule fronts
//   the main-clause auxiliary. Training subjects carry no relative clause,
//   so the rules coincide; generalization subjects carry one, so they don't.
//
//   Tense-Inflection: past sentence + PAST/PRESENT -> re-inflected sentence.
//   The linear rule agrees the verb with the most recent preceding noun; the
//   hierarchical rule agrees with the subject head. Training has no
//   number-mismatched distractor noun; generalization always does.
//
// Every example stores both rule outputs; the target is always the
// hierarchical one. Gold trees are binarized derivations (right-branching
// inside flat constituents) over the sentence words, excluding punctuation
// and the task marker.

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

enum class Num : uint8_t { sg, pl };

struct NounEntry {
    std::string sg, pl;
};

struct VerbEntry {
    std::string bare, past, pres_sg, pres_pl;
    bool transitive;
};

struct Lexicon {
    std::vector<NounEntry> nouns;
    std::vector<VerbEntry> verbs;
    std::vector<std::string> dets;
    std::vector<std::string> preps;

    static Lexicon standard() {
        Lexicon l;
        l.nouns = {{"dog", "dogs"},         {"cat", "cats"},       {"newt", "newts"},
                   {"raven", "ravens"},     {"unicorn", "unicorns"}, {"peacock", "peacocks"},
                   {"walrus", "walruses"},  {"yak", "yaks"}};
        l.verbs = {{"bark", "barked", "barks", "bark", false},
                   {"sleep", "slept", "sleeps", "sleep", false},
                   {"laugh", "laughed", "laughs", "laugh", false},
                   {"swim", "swam", "swims", "swim", false},
                   {"giggle", "giggled", "giggles", "giggle", false},
                   {"see", "saw", "sees", "see", true},
                   {"chase", "chased", "chases", "chase", true},
                   {"admire", "admired", "admires", "admire", true},
                   {"ignore", "ignored", "ignores", "ignore", true}};
        l.dets = {"the", "some", "my", "your"};
        l.preps = {"near", "by", "behind", "beside"};
        return l;
    }

    static std::string aux(Num n, bool negated) {
        if (n == Num::sg) return negated ? "doesn't" : "does";
        return negated ? "don't" : "do";
    }

    const std::string& noun(size_t i, Num n) const {
        return n == Num::sg ? nouns[i].sg : nouns[i].pl;
    }

    std::optional<Num> noun_number(const std::string& w) const {
        for (const auto& n : nouns) {
            if (n.sg == w) return Num::sg;
            if (n.pl == w) return Num::pl;
        }
        return std::nullopt;
    }

    const VerbEntry* verb_by_past(const std::string& w) const {
        for (const auto& v : verbs)
            if (v.past == w) return &v;
        return nullptr;
    }

    const VerbEntry* verb_by_bare(const std::string& w) const {
        for (const auto& v : verbs)
            if (v.bare == w) return &v;
        return nullptr;
    }

    bool is_det(const std::string& w) const {
        return std::find(dets.begin(), dets.end(), w) != dets.end();
    }
    bool is_prep(const std::string& w) const {
        return std::find(preps.begin(), preps.end(), w) != preps.end();
    }
    static bool is_aux(const std::string& w) {
        return w == "does" || w == "doesn't" || w == "do" || w == "don't";
    }
};

namespace detail {

// A generated constituent: surface tokens plus its derivation tree rooted at
// absolute leaf offset `base`.
struct Phrase {
    std::vector<std::string> tokens;
    BinaryTree tree;
    Num head_num = Num::sg;
};

inline Phrase phrase_pair(const std::string& a, const std::string& b, int32_t base) {
    Phrase p;
    p.tokens = {a, b};
    p.tree = BinaryTree::combine(BinaryTree::leaf(base), BinaryTree::leaf(base + 1));
    return p;
}

}  // namespace detail

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// ---- Question-Formation ----

class QfTask {
public:
    QfTask() : lex_(Lexicon::standard()) {
        quest_id_ = vocab_.add_special("QUEST");
        decl_id_ = vocab_.add_special("DECL");
        for (const auto& d : lex_.dets) vocab_.add(d);
        for (const auto& n : lex_.nouns) {
            vocab_.add(n.sg);
            vocab_.add(n.pl);
        }
        for (const auto& v : lex_.verbs) vocab_.add(v.bare);
        vocab_.add("does");
        vocab_.add("doesn't");
        vocab_.add("do");
        vocab_.add("don't");
        for (const auto& p : lex_.preps) vocab_.add(p);
        vocab_.add("that");
        vocab_.add(".");
        vocab_.add("?");
    }

    const Vocab& vocab() const { return vocab_; }
    const Lexicon& lexicon() const { return lex_; }

    // Applies the linear and hierarchical fronting rules symbolically.
    // input ends with '.' and a QUEST/DECL marker; throws ParseError otherwise.
    std::pair<std::vector<int32_t>, std::vector<int32_t>> rule_oracles(
        const std::vector<int32_t>& input) const {
        auto words = vocab_.decode(input);
        if (words.size() < 3) throw ParseError("qf: sentence too short");
        std::string marker = words.back();
        if (marker != "QUEST" && marker != "DECL") throw ParseError("qf: missing task marker");
        if (words[words.size() - 2] != ".") throw ParseError("qf: missing final period");
        std::vector<std::string> sent(words.begin(), words.end() - 2);

        size_t main_aux = parse_main_aux_index(sent);
        validate_main_clause(sent, main_aux);
        if (marker == "DECL") {
            std::vector<std::string> out = sent;
            out.push_back(".");
            auto ids = vocab_.encode(out);
            return {ids, ids};
        }
        size_t first_aux = sent.size();
        for (size_t i = 0; i < sent.size(); ++i)
            if (Lexicon::is_aux(sent[i])) {
                first_aux = i;
                break;
            }
        if (first_aux == sent.size()) throw ParseError("qf: no auxiliary found");
        auto front = [&](size_t pos) {
            std::vector<std::string> out;
            out.push_back(sent[pos]);
            for (size_t i = 0; i < sent.size(); ++i)
                if (i != pos) out.push_back(sent[i]);
            out.push_back("?");
            return vocab_.encode(out);
        };
        return {front(first_aux), front(main_aux)};
    }

    // One sampled example. gen examples carry a subject relative clause whose
    // auxiliary token differs from the main auxiliary.
    Example sample(Rng& rng, bool gen_split) const {
        while (true) {
            Example ex = sample_once(rng, gen_split);
            if (!gen_split) return ex;
            // enforce distinct fronted tokens so the two rules disagree on the
            // first word of the question
            const auto& lin = ex.linear_out;
            const auto& hier = ex.hier_out;
            if (!lin.empty() && !hier.empty() && lin[0] != hier[0]) return ex;
        }
    }

    DatasetSplits generate(int n_train, int n_val, int n_gen, uint64_t seed) const {
        DatasetSplits ds;
        ds.task = "qf";
        ds.vocab = vocab_;
        Rng rng(derive_seed(seed, "qf_dataset"));
        for (int i = 0; i < n_train; ++i) ds.train.push_back(tagged(sample(rng, false), Split::train));
        for (int i = 0; i < n_val; ++i) ds.val_id.push_back(tagged(sample(rng, false), Split::val_id));
        for (int i = 0; i < n_gen; ++i) ds.gen.push_back(tagged(sample(rng, true), Split::gen));
        return ds;
    }

private:
    static Example tagged(Example ex, Split s) {
        ex.split = s;
        return ex;
    }

    // Parses the subject NP and returns the index of the main-clause
    // auxiliary (the token right after the subject).
    size_t parse_main_aux_index(const std::vector<std::string>& sent) const {
        size_t pos = parse_np(sent, 0, /*allow_mods=*/true);
        if (pos >= sent.size() || !Lexicon::is_aux(sent[pos]))
            throw ParseError("qf: expected auxiliary after subject");
        return pos;
    }

    // AUX V (NP)? must consume the rest of the sentence.
    void validate_main_clause(const std::vector<std::string>& sent, size_t aux_pos) const {
        size_t pos = aux_pos + 1;
        const VerbEntry* v = pos < sent.size() ? lex_.verb_by_bare(sent[pos]) : nullptr;
        if (!v) throw ParseError("qf: expected main verb after auxiliary");
        ++pos;
        if (v->transitive) pos = parse_np(sent, pos, /*allow_mods=*/true);
        if (pos != sent.size()) throw ParseError("qf: trailing tokens after clause");
    }

    // NP := Det N (PP | RC)?; returns the index one past the NP.
    size_t parse_np(const std::vector<std::string>& sent, size_t pos, bool allow_mods) const {
        if (pos + 1 >= sent.size() || !lex_.is_det(sent[pos]) ||
            !lex_.noun_number(sent[pos + 1]))
            throw ParseError("qf: expected determiner + noun at " + std::to_string(pos));
        pos += 2;
        if (!allow_mods || pos >= sent.size()) return pos;
        if (lex_.is_prep(sent[pos])) {
            if (pos + 2 >= sent.size() || !lex_.is_det(sent[pos + 1]) ||
                !lex_.noun_number(sent[pos + 2]))
                throw ParseError("qf: malformed prepositional phrase");
            return pos + 3;
        }
        if (sent[pos] == "that") return parse_rc(sent, pos);
        return pos;
    }

    // RC := that AUX V (Det N)? | that Det N AUX V
    size_t parse_rc(const std::vector<std::string>& sent, size_t pos) const {
        ++pos;  // that
        if (pos >= sent.size()) throw ParseError("qf: dangling relativizer");
        if (Lexicon::is_aux(sent[pos])) {
            ++pos;
            const VerbEntry* v = pos < sent.size() ? lex_.verb_by_bare(sent[pos]) : nullptr;
            if (!v) throw ParseError("qf: expected verb in relative clause");
            ++pos;
            if (v->transitive) {
                if (pos + 1 >= sent.size() || !lex_.is_det(sent[pos]) ||
                    !lex_.noun_number(sent[pos + 1]))
                    throw ParseError("qf: transitive relative clause lacks object");
                pos += 2;
            }
            return pos;
        }
        // object relative: that Det N AUX V
        if (pos + 3 >= sent.size() || !lex_.is_det(sent[pos]) || !lex_.noun_number(sent[pos + 1]) ||
            !Lexicon::is_aux(sent[pos + 2]) || !lex_.verb_by_bare(sent[pos + 3]))
            throw ParseError("qf: malformed object relative clause");
        return pos + 4;
    }

    // ---- sampling ----

    detail::Phrase sample_flat_np(Rng& rng, int32_t base) const {
        Num n = rng.bernoulli(0.5) ? Num::sg : Num::pl;
        const auto& det = lex_.dets[rng.uniform_int(lex_.dets.size())];
        const auto& noun = lex_.noun(rng.uniform_int(lex_.nouns.size()), n);
        detail::Phrase p = detail::phrase_pair(det, noun, base);
        p.head_num = n;
        return p;
    }

    // RC := that AUX V | that AUX V Det N | that Det N AUX V
    // head_num is the number of the modified noun (subject relatives agree
    // with it); returns the chosen auxiliary token via aux_out.
    detail::Phrase sample_rc(Rng& rng, int32_t base, Num modified_num, std::string* aux_out) const {
        int kind = static_cast<int>(rng.uniform_int(3));
        bool neg = rng.bernoulli(0.5);
        detail::Phrase p;
        if (kind < 2) {
            // subject relative
            std::string aux = Lexicon::aux(modified_num, neg);
            const VerbEntry& v = pick_verb(rng, /*transitive=*/kind == 1);
            if (aux_out) *aux_out = aux;
            if (kind == 0) {
                p.tokens = {"that", aux, v.bare};
                p.tree = BinaryTree::combine(
                    BinaryTree::leaf(base),
                    BinaryTree::combine(BinaryTree::leaf(base + 1), BinaryTree::leaf(base + 2)));
            } else {
                detail::Phrase obj = sample_flat_np(rng, base + 3);
                p.tokens = {"that", aux, v.bare, obj.tokens[0], obj.tokens[1]};
                p.tree = BinaryTree::combine(
                    BinaryTree::leaf(base),
                    BinaryTree::combine(
                        BinaryTree::leaf(base + 1),
                        BinaryTree::combine(BinaryTree::leaf(base + 2), obj.tree)));
            }
        } else {
            // object relative: inner subject picks the auxiliary
            detail::Phrase inner = sample_flat_np(rng, base + 1);
            std::string aux = Lexicon::aux(inner.head_num, neg);
            const VerbEntry& v = pick_verb(rng, /*transitive=*/true);
            if (aux_out) *aux_out = aux;
            p.tokens = {"that", inner.tokens[0], inner.tokens[1], aux, v.bare};
            p.tree = BinaryTree::combine(
                BinaryTree::leaf(base),
                BinaryTree::combine(inner.tree,
                                    BinaryTree::combine(BinaryTree::leaf(base + 3),
                                                        BinaryTree::leaf(base + 4))));
        }
        p.head_num = modified_num;
        return p;
    }

    detail::Phrase sample_pp(Rng& rng, int32_t base) const {
        const auto& prep = lex_.preps[rng.uniform_int(lex_.preps.size())];
        detail::Phrase inner = sample_flat_np(rng, base + 1);
        detail::Phrase p;
        p.tokens = {prep, inner.tokens[0], inner.tokens[1]};
        p.tree = BinaryTree::combine(BinaryTree::leaf(base), inner.tree);
        p.head_num = inner.head_num;
        return p;
    }

    const VerbEntry& pick_verb(Rng& rng, bool transitive) const {
        std::vector<const VerbEntry*> pool;
        for (const auto& v : lex_.verbs)
            if (v.transitive == transitive) pool.push_back(&v);
        return *pool[rng.uniform_int(pool.size())];
    }

    // NP with optional modifier. mode: 0 = bare/PP only (train subject),
    // 1 = forced RC (gen subject), 2 = any modifier (object position).
    detail::Phrase sample_np(Rng& rng, int32_t base, int mode, std::string* rc_aux) const {
        detail::Phrase head = sample_flat_np(rng, base);
        int choice;
        if (mode == 1) {
            choice = 2;
        } else if (mode == 0) {
            choice = rng.bernoulli(0.35) ? 1 : 0;
        } else {
            double u = rng.uniform();
            choice = u < 0.5 ? 0 : (u < 0.75 ? 1 : 2);
        }
        if (choice == 0) return head;
        detail::Phrase mod = choice == 1 ? sample_pp(rng, base + 2)
                                         : sample_rc(rng, base + 2, head.head_num, rc_aux);
        detail::Phrase p;
        p.tokens = head.tokens;
        p.tokens.insert(p.tokens.end(), mod.tokens.begin(), mod.tokens.end());
        p.tree = BinaryTree::combine(
            BinaryTree::leaf(base),
            BinaryTree::combine(BinaryTree::leaf(base + 1), mod.tree));
        p.head_num = head.head_num;
        return p;
    }

    Example sample_once(Rng& rng, bool gen_split) const {
        std::string rc_aux;
        detail::Phrase subj = sample_np(rng, 0, gen_split ? 1 : 0, &rc_aux);
        Num n = subj.head_num;
        bool neg = rng.bernoulli(0.5);
        std::string aux = Lexicon::aux(n, neg);
        const VerbEntry& v = pick_verb(rng, rng.bernoulli(0.5));
        int32_t vp_base = static_cast<int32_t>(subj.tokens.size());

        std::vector<std::string> sent = subj.tokens;
        sent.push_back(aux);
        sent.push_back(v.bare);
        BinaryTree vp;
        if (v.transitive) {
            detail::Phrase obj = sample_np(rng, vp_base + 2, 2, nullptr);
            sent.insert(sent.end(), obj.tokens.begin(), obj.tokens.end());
            vp = BinaryTree::combine(
                BinaryTree::leaf(vp_base),
                BinaryTree::combine(BinaryTree::leaf(vp_base + 1), obj.tree));
        } else {
            vp = BinaryTree::combine(BinaryTree::leaf(vp_base), BinaryTree::leaf(vp_base + 1));
        }

        Example ex;
        ex.gold_tree = BinaryTree::combine(subj.tree, vp);
        bool quest = gen_split || rng.bernoulli(0.5);
        std::vector<std::string> words = sent;
        words.push_back(".");
        words.push_back(quest ? "QUEST" : "DECL");
        ex.input = vocab_.encode(words);
        auto [lin, hier] = rule_oracles(ex.input);
        ex.linear_out = std::move(lin);
        ex.hier_out = std::move(hier);
        ex.target = ex.hier_out;
        return ex;
    }

    Lexicon lex_;
    Vocab vocab_;
    int32_t quest_id_ = -1;
    int32_t decl_id_ = -1;
};

// ---- Tense-Inflection ----

class TiTask {
public:
    TiTask() : lex_(Lexicon::standard()) {
        past_id_ = vocab_.add_special("PAST");
        present_id_ = vocab_.add_special("PRESENT");
        for (const auto& d : lex_.dets) vocab_.add(d);
        for (const auto& n : lex_.nouns) {
            vocab_.add(n.sg);
            vocab_.add(n.pl);
        }
        for (const auto& v : lex_.verbs) {
            vocab_.add(v.past);
            vocab_.add(v.pres_sg);
            vocab_.add(v.pres_pl);
        }
        for (const auto& p : lex_.preps) vocab_.add(p);
        vocab_.add(".");
    }

    const Vocab& vocab() const { return vocab_; }
    const Lexicon& lexicon() const { return lex_; }

    // Applies both agreement rules symbolically; also reports the main-verb
    // index in the output sentence via verb_index_out.
    std::pair<std::vector<int32_t>, std::vector<int32_t>> rule_oracles(
        const std::vector<int32_t>& input, int* verb_index_out = nullptr) const {
        auto words = vocab_.decode(input);
        if (words.size() < 4) throw ParseError("ti: sentence too short");
        std::string marker = words.back();
        if (marker != "PAST" && marker != "PRESENT") throw ParseError("ti: missing task marker");
        if (words[words.size() - 2] != ".") throw ParseError("ti: missing final period");
        std::vector<std::string> sent(words.begin(), words.end() - 2);

        // subject: Det N (P Det N)?
        size_t pos = 0;
        auto head_num = parse_flat_np(sent, pos);
        Num recent = head_num;
        if (pos < sent.size() && lex_.is_prep(sent[pos])) {
            ++pos;
            recent = parse_flat_np(sent, pos);
        }
        if (pos >= sent.size()) throw ParseError("ti: missing main verb");
        const VerbEntry* v = lex_.verb_by_past(sent[pos]);
        if (!v) throw ParseError("ti: expected past-tense main verb at " + std::to_string(pos));
        size_t verb_pos = pos;
        ++pos;
        if (v->transitive) {
            parse_flat_np(sent, pos);
            if (pos < sent.size() && lex_.is_prep(sent[pos])) {
                ++pos;
                parse_flat_np(sent, pos);
            }
        }
        if (pos != sent.size()) throw ParseError("ti: trailing tokens after clause");
        if (verb_index_out) *verb_index_out = static_cast<int>(verb_pos);

        auto inflect = [&](Num agree_with) {
            std::vector<std::string> out = sent;
            if (marker == "PRESENT")
                out[verb_pos] = agree_with == Num::sg ? v->pres_sg : v->pres_pl;
            out.push_back(".");
            return vocab_.encode(out);
        };
        return {inflect(recent), inflect(head_num)};
    }

    Example sample(Rng& rng, bool gen_split) const {
        // subject Det N, optionally with a PP distractor. Train distractors
        // match the subject number; gen distractors always mismatch and the
        // target tense is always PRESENT.
        Num n = rng.bernoulli(0.5) ? Num::sg : Num::pl;
        std::vector<std::string> sent;
        const auto& det = lex_.dets[rng.uniform_int(lex_.dets.size())];
        const auto& noun = lex_.noun(rng.uniform_int(lex_.nouns.size()), n);
        sent = {det, noun};
        BinaryTree subj_tree =
            BinaryTree::combine(BinaryTree::leaf(0), BinaryTree::leaf(1));
        bool with_pp = gen_split || rng.bernoulli(0.4);
        if (with_pp) {
            Num pp_num = gen_split ? (n == Num::sg ? Num::pl : Num::sg)
                                   : n;  // train: same number, no mismatch
            const auto& prep = lex_.preps[rng.uniform_int(lex_.preps.size())];
            const auto& det2 = lex_.dets[rng.uniform_int(lex_.dets.size())];
            const auto& noun2 = lex_.noun(rng.uniform_int(lex_.nouns.size()), pp_num);
            sent.insert(sent.end(), {prep, det2, noun2});
            BinaryTree pp = BinaryTree::combine(
                BinaryTree::leaf(2),
                BinaryTree::combine(BinaryTree::leaf(3), BinaryTree::leaf(4)));
            subj_tree = BinaryTree::combine(
                BinaryTree::leaf(0), BinaryTree::combine(BinaryTree::leaf(1), pp));
        }
        const VerbEntry& v = pick_verb(rng, rng.bernoulli(0.5));
        int32_t vp_base = static_cast<int32_t>(sent.size());
        sent.push_back(v.past);
        BinaryTree vp = BinaryTree::leaf(vp_base);
        if (v.transitive) {
            Num on = rng.bernoulli(0.5) ? Num::sg : Num::pl;
            const auto& det3 = lex_.dets[rng.uniform_int(lex_.dets.size())];
            const auto& noun3 = lex_.noun(rng.uniform_int(lex_.nouns.size()), on);
            sent.insert(sent.end(), {det3, noun3});
            BinaryTree obj = BinaryTree::combine(BinaryTree::leaf(vp_base + 1),
                                                 BinaryTree::leaf(vp_base + 2));
            vp = BinaryTree::combine(BinaryTree::leaf(vp_base), obj);
        }

        Example ex;
        ex.gold_tree = BinaryTree::combine(subj_tree, vp);
        bool present = gen_split || rng.bernoulli(0.5);
        std::vector<std::string> words = sent;
        words.push_back(".");
        words.push_back(present ? "PRESENT" : "PAST");
        ex.input = vocab_.encode(words);
        int verb_index = -1;
        auto [lin, hier] = rule_oracles(ex.input, &verb_index);
        ex.linear_out = std::move(lin);
        ex.hier_out = std::move(hier);
        ex.target = ex.hier_out;
        ex.verb_index = verb_index;
        return ex;
    }

    DatasetSplits generate(int n_train, int n_val, int n_gen, uint64_t seed) const {
        DatasetSplits ds;
        ds.task = "ti";
        ds.vocab = vocab_;
        Rng rng(derive_seed(seed, "ti_dataset"));
        auto tag = [](Example ex, Split s) {
            ex.split = s;
            return ex;
        };
        for (int i = 0; i < n_train; ++i) ds.train.push_back(tag(sample(rng, false), Split::train));
        for (int i = 0; i < n_val; ++i) ds.val_id.push_back(tag(sample(rng, false), Split::val_id));
        for (int i = 0; i < n_gen; ++i) ds.gen.push_back(tag(sample(rng, true), Split::gen));
        return ds;
    }

private:
    // Det N; advances pos and returns the noun's number.
    Num parse_flat_np(const std::vector<std::string>& sent, size_t& pos) const {
        if (pos + 1 >= sent.size() || !lex_.is_det(sent[pos]))
            throw ParseError("ti: expected determiner at " + std::to_string(pos));
        auto n = lex_.noun_number(sent[pos + 1]);
        if (!n) throw ParseError("ti: expected noun at " + std::to_string(pos + 1));
        pos += 2;
        return *n;
    }

    const VerbEntry& pick_verb(Rng& rng, bool transitive) const {
        std::vector<const VerbEntry*> pool;
        for (const auto& v : lex_.verbs)
            if (v.transitive == transitive) pool.push_back(&v);
        return *pool[rng.uniform_int(pool.size())];
    }

    Lexicon lex_;
    Vocab vocab_;
    int32_t past_id_ = -1;
    int32_t present_id_ = -1;
};

// Convenience entry points matching the CLI task names.
inline DatasetSplits gen_question_formation(int n_train, int n_val, int n_gen, uint64_t seed) {
    return QfTask().generate(n_train, n_val, n_gen, seed);
}

inline DatasetSplits gen_tense_inflection(int n_train, int n_val, int n_gen, uint64_t seed) {
    return TiTask().generate(n_train, n_val, n_gen, seed);
}

}  // namespace groklab
