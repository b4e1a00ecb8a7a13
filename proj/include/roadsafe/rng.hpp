// rng.hpp - seeded random streams with named substream derivation
//
// All randomness in the pipeline flows from one root seed. Components draw
// from named substreams (Rng::substream(seed, "shuffle") etc.) so each stage
// is reproducible in isolation. Distributions are implemented directly on
// top of mt19937_64 output; std::uniform_real_distribution and friends are
// not guaranteed bit-identical across standard libraries.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "roadsafe/common.hpp"

namespace roadsafe {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng substream(std::uint64_t seed, std::string_view name) {
        return Rng(fnv1a64(name, seed ^ 0x9e3779b97f4a7c15ull));
    }

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds, rejection-free modulo bias acceptable at these ranges
    int uniform_int(int lo, int hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(gen_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace roadsafe
