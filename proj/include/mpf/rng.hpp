#pragma once

#include <cmath>
#include <cstdint>

namespace mpf {

// SplitMix64 (Vigna, 2015): 64-bit state, one multiply-xorshift pipeline per
// draw. Chosen over std::mt19937 because the algorithm is fixed by the
// published constants, so streams are identical on every platform and
// standard library. All stochastic code in this project draws from this
// generator only.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform double in [0, 1) with 53 random bits
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; both values of each pair are used so
    // the stream advances two uniforms per two normals
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // derive an independent stream; used to give each section/model its own
    // deterministic substream
    Rng fork(std::uint64_t salt) {
        std::uint64_t s = next_u64() ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
        return Rng(s);
    }

    // serializable state (the Box-Muller spare is part of it)
    struct State {
        std::uint64_t s = 0;
        double spare = 0.0;
        bool have_spare = false;
    };
    State state() const { return {state_, spare_, have_spare_}; }
    void set_state(const State& st) {
        state_ = st.s;
        spare_ = st.spare;
        have_spare_ = st.have_spare;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mpf
