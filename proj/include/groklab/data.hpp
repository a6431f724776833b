#pragma once

// Examples, dataset splits and the line-per-example TSV serialization:
//   input <TAB> target <TAB> tree <TAB> split <TAB> meta
// where input/target are space-joined tokens, tree is a balanced-paren string
// over the first leaf-count input tokens, and meta is space-joined key=value
// pairs (list values comma-joined).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "groklab/nn.hpp"
#include "groklab/tree.hpp"
#include "groklab/vocab.hpp"

namespace groklab {

enum class Split { train, val_id, gen };

inline std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val_id: return "val_id";
        case Split::gen: return "gen";
    }
    throw std::logic_error("split_name: bad split");
}

inline Split split_from_name(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val_id") return Split::val_id;
    if (s == "gen") return Split::gen;
    throw std::invalid_argument("split_from_name: bad split '" + s + "'");
}

struct Example {
    std::vector<int32_t> input;    // includes task marker for QF/TI
    std::vector<int32_t> target;   // empty for Dyck (pure LM)
    BinaryTree gold_tree;          // over input[0 .. n_leaves)
    Split split = Split::train;

    // task meta
    std::string structure;             // Dyck 0/1 open-close pattern
    int depth = 0;                     // Dyck max nesting depth
    std::vector<int32_t> linear_out;   // QF/TI rule-oracle outputs
    std::vector<int32_t> hier_out;
    int verb_index = -1;               // TI: main-verb position in target
};

struct DatasetSplits {
    std::string task;  // dyck | qf | ti
    Vocab vocab;
    std::vector<Example> train, val_id, gen;

    const std::vector<Example>& split(Split s) const {
        switch (s) {
            case Split::train: return train;
            case Split::val_id: return val_id;
            case Split::gen: return gen;
        }
        throw std::logic_error("DatasetSplits: bad split");
    }
};

// ---- LM sequence assembly ----

// BOS + input [+ SEP + target] + EOS
inline std::vector<int32_t> lm_sequence(const Example& ex, const Vocab& v) {
    std::vector<int32_t> seq;
    seq.reserve(ex.input.size() + ex.target.size() + 3);
    seq.push_back(v.bos());
    seq.insert(seq.end(), ex.input.begin(), ex.input.end());
    if (!ex.target.empty()) {
        seq.push_back(v.sep());
        seq.insert(seq.end(), ex.target.begin(), ex.target.end());
    }
    seq.push_back(v.eos());
    return seq;
}

// Decode prefix: BOS + input + SEP (empty target tasks have no decode prefix).
inline std::vector<int32_t> decode_prefix(const Example& ex, const Vocab& v) {
    std::vector<int32_t> seq;
    seq.push_back(v.bos());
    seq.insert(seq.end(), ex.input.begin(), ex.input.end());
    seq.push_back(v.sep());
    return seq;
}

// Packs examples into a training batch with shifted next-token targets.
// loss_on_target_only restricts the loss to the continuation after SEP.
inline PackedBatch make_batch(const std::vector<const Example*>& exs, const Vocab& v,
                              bool loss_on_target_only = false) {
    std::vector<std::vector<int32_t>> seqs;
    seqs.reserve(exs.size());
    for (const Example* e : exs) seqs.push_back(lm_sequence(*e, v));
    PackedBatch b = pack_sequences(seqs);
    for (const auto& s : seqs) {
        size_t sep_pos = s.size();
        if (loss_on_target_only) {
            for (size_t i = 0; i < s.size(); ++i)
                if (s[i] == v.sep()) {
                    sep_pos = i;
                    break;
                }
        }
        for (size_t i = 0; i + 1 < s.size(); ++i) {
            b.targets.push_back(s[i + 1]);
            bool on = !loss_on_target_only || i >= sep_pos;
            b.loss_mask.push_back(on ? 1 : 0);
        }
        b.targets.push_back(v.pad());
        b.loss_mask.push_back(0);
    }
    return b;
}

// ---- serialization ----

namespace detail {

inline std::vector<std::string> split_string(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string join_tokens(const std::vector<int32_t>& ids, const Vocab& v) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += v.token(ids[i]);
    }
    return out;
}

inline std::vector<int32_t> parse_tokens(const std::string& s, const Vocab& v) {
    std::vector<int32_t> out;
    if (s.empty()) return out;
    for (const auto& t : split_string(s, ' '))
        if (!t.empty()) out.push_back(v.id(t));
    return out;
}

inline std::string join_ids_csv(const std::vector<int32_t>& ids, const Vocab& v) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ',';
        out += v.token(ids[i]);
    }
    return out;
}

}  // namespace detail

inline std::string example_to_line(const Example& ex, const Vocab& v) {
    std::ostringstream os;
    os << detail::join_tokens(ex.input, v) << '\t' << detail::join_tokens(ex.target, v) << '\t'
       << ex.gold_tree.to_string() << '\t' << split_name(ex.split) << '\t';
    bool first = true;
    auto emit = [&](const std::string& key, const std::string& val) {
        if (!first) os << ' ';
        os << key << '=' << val;
        first = false;
    };
    if (!ex.structure.empty()) emit("structure", ex.structure);
    if (ex.depth > 0) emit("depth", std::to_string(ex.depth));
    if (!ex.linear_out.empty()) emit("linear", detail::join_ids_csv(ex.linear_out, v));
    if (!ex.hier_out.empty()) emit("hier", detail::join_ids_csv(ex.hier_out, v));
    if (ex.verb_index >= 0) emit("verb_index", std::to_string(ex.verb_index));
    return os.str();
}

inline Example example_from_line(const std::string& line, const Vocab& v) {
    auto fields = detail::split_string(line, '\t');
    if (fields.size() != 5)
        throw std::runtime_error("example_from_line: expected 5 tab-separated fields");
    Example ex;
    ex.input = detail::parse_tokens(fields[0], v);
    ex.target = detail::parse_tokens(fields[1], v);
    if (!fields[2].empty()) ex.gold_tree = BinaryTree::parse(fields[2]);
    ex.split = split_from_name(fields[3]);
    if (!fields[4].empty()) {
        for (const auto& kv : detail::split_string(fields[4], ' ')) {
            if (kv.empty()) continue;
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("example_from_line: bad meta pair '" + kv + "'");
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "structure") {
                ex.structure = val;
            } else if (key == "depth") {
                ex.depth = std::stoi(val);
            } else if (key == "linear" || key == "hier") {
                std::vector<int32_t> ids;
                for (const auto& t : detail::split_string(val, ','))
                    if (!t.empty()) ids.push_back(v.id(t));
                (key == "linear" ? ex.linear_out : ex.hier_out) = ids;
            } else if (key == "verb_index") {
                ex.verb_index = std::stoi(val);
            } else {
                throw std::runtime_error("example_from_line: unknown meta key '" + key + "'");
            }
        }
    }
    return ex;
}

inline void write_examples(const std::string& path, const std::vector<Example>& exs,
                           const Vocab& v) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_examples: cannot open " + path);
    for (const auto& ex : exs) f << example_to_line(ex, v) << "\n";
}

inline std::vector<Example> read_examples(const std::string& path, const Vocab& v) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_examples: cannot open " + path);
    std::vector<Example> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) out.push_back(example_from_line(line, v));
    }
    return out;
}

inline void save_dataset(const DatasetSplits& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    ds.vocab.save(dir + "/vocab.txt");
    write_examples(dir + "/train.tsv", ds.train, ds.vocab);
    write_examples(dir + "/val_id.tsv", ds.val_id, ds.vocab);
    write_examples(dir + "/gen.tsv", ds.gen, ds.vocab);
    std::ofstream meta(dir + "/dataset.txt", std::ios::binary);
    meta << "task=" << ds.task << "\n";
}

inline DatasetSplits load_dataset(const std::string& dir) {
    DatasetSplits ds;
    ds.vocab = Vocab::load(dir + "/vocab.txt");
    std::ifstream meta(dir + "/dataset.txt", std::ios::binary);
    if (!meta) throw std::runtime_error("load_dataset: missing " + dir + "/dataset.txt");
    std::string line;
    while (std::getline(meta, line)) {
        if (line.rfind("task=", 0) == 0) ds.task = line.substr(5);
    }
    if (ds.task.empty()) throw std::runtime_error("load_dataset: dataset.txt lacks task=");
    ds.train = read_examples(dir + "/train.tsv", ds.vocab);
    ds.val_id = read_examples(dir + "/val_id.tsv", ds.vocab);
    ds.gen = read_examples(dir + "/gen.tsv", ds.vocab);
    return ds;
}

}  // namespace groklab
