#ifndef ICAFUSION_RNG_HPP
#define ICAFUSION_RNG_HPP

#include <cmath>
#include <cstdint>

namespace icafusion {

/// splitmix64 stream. Chosen over std::mt19937 + std::shuffle because the
/// whole sequence (and anything shuffled with it) must be reproducible
/// bit-exactly from the recorded 64-bit state, independent of the standard
/// library in use. Algorithm name recorded in data manifests:
/// "splitmix64-fisher-yates-v1".
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, bound). Modulo reduction; bias is < 2^-32 for the
    /// bounds used here (dataset sizes, epsilon draws).
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (one value per call, no caching so the
    /// stream position is a pure function of the call count).
    double normal() {
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    /// Derives an independent stream, e.g. per epoch or per parameter group.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
        Rng r(seed ^ (0x6a09e667f3bcc909ull + salt * 0x9e3779b97f4a7c15ull));
        return r.next_u64();
    }

    /// In-place Fisher-Yates shuffle driven by this stream.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

constexpr const char* kShuffleAlgorithm = "splitmix64-fisher-yates-v1";

}  // namespace icafusion

#endif
