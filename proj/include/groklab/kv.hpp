#pragma once

// Flat key=value config text: one pair per line, '#' comments, insertion
// order preserved so serialization is deterministic.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace groklab {

class KvMap {
public:
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : pairs_) {
            if (k == key) {
                v = value;
                return;
            }
        }
        pairs_.emplace_back(key, value);
    }

    void set_i64(const std::string& key, int64_t v) { set(key, std::to_string(v)); }
    void set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

    void set_f64(const std::string& key, double v) {
        char buf[64];
        snprintf(buf, sizeof(buf), "%.17g", v);
        set(key, buf);
    }

    void set_list(const std::string& key, const std::vector<int>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(v[i]);
        }
        set(key, s);
    }

    bool has(const std::string& key) const {
        for (const auto& [k, v] : pairs_)
            if (k == key) return true;
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : pairs_)
            if (k == key) return v;
        throw std::out_of_range("KvMap: missing key '" + key + "'");
    }

    std::string get_or(const std::string& key, const std::string& dflt) const {
        return has(key) ? get(key) : dflt;
    }

    int64_t get_i64(const std::string& key) const { return std::stoll(get(key)); }
    double get_f64(const std::string& key) const { return std::stod(get(key)); }

    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::invalid_argument("KvMap: bad boolean for '" + key + "': " + v);
    }

    std::vector<int> get_list(const std::string& key) const {
        std::vector<int> out;
        std::istringstream is(get(key));
        std::string item;
        while (std::getline(is, item, ',')) {
            if (!item.empty()) out.push_back(std::stoi(item));
        }
        return out;
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : pairs_) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }

    static KvMap parse(const std::string& text) {
        KvMap m;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            // trim
            size_t a = line.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            size_t b = line.find_last_not_of(" \t\r");
            line = line.substr(a, b - a + 1);
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("KvMap: bad line '" + line + "'");
            m.set(line.substr(0, eq), line.substr(eq + 1));
        }
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("KvMap::save: cannot open " + path);
        f << serialize();
    }

    static KvMap load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("KvMap::load: cannot open " + path);
        std::ostringstream os;
        os << f.rdbuf();
        return parse(os.str());
    }

    const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }

private:
    std::vector<std::pair<std::string, std::string>> pairs_;
};

}  // namespace groklab
