#pragma once

// Token <-> id bijection with reserved special markers. Ids are assigned in
// insertion order, so vocabulary files are deterministic.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace groklab {

class Vocab {
public:
    static constexpr const char* kPad = "<pad>";
    static constexpr const char* kBos = "<bos>";
    static constexpr const char* kEos = "<eos>";
    static constexpr const char* kSep = "<sep>";

    Vocab() {
        add_special(kPad);
        add_special(kBos);
        add_special(kEos);
        add_special(kSep);
    }

    int32_t add(const std::string& token) {
        auto it = ids_.find(token);
        if (it != ids_.end()) return it->second;
        int32_t id = static_cast<int32_t>(tokens_.size());
        tokens_.push_back(token);
        ids_.emplace(token, id);
        return id;
    }

    int32_t add_special(const std::string& token) {
        int32_t id = add(token);
        specials_.insert(id);
        return id;
    }

    int32_t id(const std::string& token) const {
        auto it = ids_.find(token);
        if (it == ids_.end()) throw std::out_of_range("Vocab: unknown token '" + token + "'");
        return it->second;
    }

    bool contains(const std::string& token) const { return ids_.count(token) > 0; }

    const std::string& token(int32_t id) const {
        if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
            throw std::out_of_range("Vocab: bad id " + std::to_string(id));
        return tokens_[static_cast<size_t>(id)];
    }

    bool is_special(int32_t id) const { return specials_.count(id) > 0; }
    int32_t size() const { return static_cast<int32_t>(tokens_.size()); }

    int32_t pad() const { return 0; }
    int32_t bos() const { return 1; }
    int32_t eos() const { return 2; }
    int32_t sep() const { return 3; }

    std::vector<int32_t> encode(const std::vector<std::string>& toks) const {
        std::vector<int32_t> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(id(t));
        return out;
    }

    std::vector<std::string> decode(const std::vector<int32_t>& ids) const {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (int32_t i : ids) out.push_back(token(i));
        return out;
    }

    // One token per line; '!' prefix flags specials.
    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("Vocab::save: cannot open " + path);
        for (size_t i = 0; i < tokens_.size(); ++i) {
            f << (is_special(static_cast<int32_t>(i)) ? "!" : "") << tokens_[i] << "\n";
        }
    }

    static Vocab load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("Vocab::load: cannot open " + path);
        Vocab v;
        v.tokens_.clear();
        v.ids_.clear();
        v.specials_.clear();
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            if (line[0] == '!') {
                v.add_special(line.substr(1));
            } else {
                v.add(line);
            }
        }
        if (v.size() < 4 || v.token(0) != kPad || v.token(1) != kBos || v.token(2) != kEos ||
            v.token(3) != kSep)
            throw std::runtime_error("Vocab::load: missing reserved markers in " + path);
        return v;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> ids_;
    std::unordered_set<int32_t> specials_;
};

}  // namespace groklab
