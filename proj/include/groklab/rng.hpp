#pragma once

// Deterministic RNG used everywhere in groklab. std::mt19937_64 is fully
// specified by the standard, but the <random> distributions are not, so all
// transforms (uniform, normal, shuffles) are implemented here by hand.

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace groklab {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (seed, tag, index). Stateless, so
// resumable components can re-derive their streams instead of serializing them.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
    uint64_t h = splitmix64(seed);
    for (char c : tag) {
        h = splitmix64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
    }
    return splitmix64(h ^ index);
}

class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Masked rejection keeps the draw unbiased.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
        if ((n & (n - 1)) == 0) return next_u64() & (n - 1);
        uint64_t mask = ~uint64_t{0} >> std::countl_zero(n - 1);
        uint64_t v;
        do {
            v = next_u64() & mask;
        } while (v >= n);
        return v;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Weighted index draw; weights must be nonnegative with positive sum.
    size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to 0");
        double r = uniform() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.size() - 1;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_ << " " << (has_spare_ ? 1 : 0) << " ";
        os.precision(17);
        os << spare_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        int spare_flag = 0;
        is >> engine_ >> spare_flag >> spare_;
        if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed state");
        has_spare_ = spare_flag != 0;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace groklab
