#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sglmm {

// One round of SplitMix64; advances the state and returns the mixed word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic random stream. All variate generation in the library goes
// through this class so that a (seed, call-order) pair pins every draw;
// std::random distributions are avoided because their algorithms are
// implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Independent substream derived from a master seed by SplitMix64 mixing.
    static Rng derive(std::uint64_t master, std::uint64_t stream) {
        std::uint64_t s = master ^ (0xA0761D6478BD642FULL * (stream + 1));
        splitmix64(s);
        return Rng(splitmix64(s));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on the open interval (0,1): safe under log().
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via the Marsaglia polar method; second variate cached.
    double normal() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cache_ = v * f;
        have_cache_ = true;
        return u * f;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

  private:
    std::mt19937_64 gen_;
    bool have_cache_ = false;
    double cache_ = 0.0;
};

}  // namespace sglmm
