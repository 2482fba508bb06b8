#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gcad/core.hpp"

namespace gcad {

/// Deterministic random source. Every stochastic routine in the library takes
/// one of these (or a seed) so that identical seeds reproduce runs bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed ? seed : 0x9e3779b97f4a7c15ull)) {}

    /// Raw 64-bit draw (xorshift64*).
    std::uint64_t next_u64() {
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return std::size_t(uniform() * double(n)) % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    /// Standard Gumbel(0,1) draw: -log(-log(U)).
    double gumbel() {
        double u = 0.0;
        while (u <= 0.0 || u >= 1.0) u = uniform();
        return -std::log(-std::log(u));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_index(i)]);
    }

    /// k distinct indices from [0, n), order randomized.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw Error("sample_without_replacement: k > n");
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < k; ++i)
            std::swap(idx[i], idx[i + uniform_index(n - i)]);
        idx.resize(k);
        return idx;
    }

    /// Independent child stream; children with distinct tags never collide.
    Rng split(std::uint64_t tag) {
        return Rng(splitmix(state_ ^ (0x94d049bb133111ebull * (tag + 1))));
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gcad
