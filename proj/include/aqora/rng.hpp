#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace aqora {

// splitmix64; used both as a stream generator and as a mixing hash.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Deterministic PRNG with identical output on every platform. std::mt19937_64
// would also be portable, but the std distributions on top of it are not
// specified bit-for-bit, so we roll the few samplers we need.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Modulo bias is ~n/2^64, irrelevant at our scales.
    uint64_t uniform_u64(uint64_t n) { return n ? next_u64() % n : 0; }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call (the sibling draw is discarded to keep
    // the stream position independent of call parity).
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

// Sampler for Zipf-distributed ranks over {0, .., n-1} with weight
// (rank+1)^-s. Exponent 0 degenerates to uniform. Built once per column.
class ZipfSampler {
public:
    ZipfSampler(uint64_t n, double exponent) : cdf_(n) {
        double acc = 0.0;
        for (uint64_t k = 0; k < n; ++k) {
            acc += std::pow(static_cast<double>(k + 1), -exponent);
            cdf_[k] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }

    uint64_t sample(Rng& rng) const {
        double u = rng.uniform();
        size_t lo = 0, hi = cdf_.size();
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cdf_[mid] < u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo < cdf_.size() ? lo : cdf_.size() - 1;
    }

    double pmf(uint64_t rank) const {
        if (cdf_.empty()) return 0.0;
        return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1];
    }

private:
    std::vector<double> cdf_;
};

} // namespace aqora
