#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mfg {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic random stream with named substreams. Substreams derived from
// the same key and tags are identical regardless of which thread draws from
// them, so parallel loops stay reproducible. Counter-based: the state walks a
// per-stream odd increment and each output is a full 64-bit mix of the
// counter, so constructing a stream costs two mixes and spawning one per
// sample is fine.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed)) { seed_from_key(); }

    // Derive an independent stream keyed by up to four tags.
    Rng sub(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
            std::uint64_t d = 0) const {
        std::uint64_t k = key_;
        k = mix64(k ^ mix64(a));
        k = mix64(k ^ mix64(b));
        k = mix64(k ^ mix64(c));
        k = mix64(k ^ mix64(d));
        Rng r(*this);
        r.key_ = k;
        r.seed_from_key();
        return r;
    }

    // Uniform on (0, 1]; never returns 0 so log(u) is always finite.
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    std::uint64_t next_u64() {
        state_ += gamma_;
        return mix64(state_);
    }

    // Index sampled from an explicit probability vector.
    int categorical(const std::vector<double>& probs) {
        double u = uniform01();
        double cum = 0.0;
        int last = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            cum += probs[i];
            last = static_cast<int>(i);
            if (u <= cum) return last;
        }
        return last;  // fp slack: cum may finish at 1-1e-16
    }

    // T with P(T = t) = (1 - q) q^t, t >= 0; q is the continuation probability.
    int geometric(double q) {
        if (q <= 0.0) return 0;
        if (q >= 1.0) throw std::invalid_argument("geometric: q must be < 1");
        double u = uniform01();
        double t = std::floor(std::log(u) / std::log(q));
        if (t < 0.0) t = 0.0;
        if (t > 1e9) t = 1e9;
        return static_cast<int>(t);
    }

private:
    // Distinct odd increments give algebraically distinct sequences, so
    // substreams never overlap segments of one shared cycle.
    void seed_from_key() {
        state_ = mix64(key_ ^ 0x6a09e667f3bcc909ull);
        gamma_ = mix64(key_ + 0xbb67ae8584caa73bull) | 1ull;
    }

    std::uint64_t key_;
    std::uint64_t state_ = 0;
    std::uint64_t gamma_ = 1;
};

// Pure helper for tests: geometric draw from an explicit uniform variate.
inline int geometric_from_uniform(double u, double q) {
    if (q <= 0.0) return 0;
    double t = std::floor(std::log(u) / std::log(q));
    return t < 0.0 ? 0 : static_cast<int>(t);
}

}  // namespace mfg
