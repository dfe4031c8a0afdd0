#ifndef NSCAM_RNG_HPP
#define NSCAM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nscam {

/// Deterministic sampling helpers. Everything here is defined in terms of
/// the raw mt19937_64 output stream, so a given seed produces the same
/// draws on every platform; std::shuffle and std::*_distribution are
/// avoided because their draw sequences are implementation-defined.

inline std::uint64_t rand_below(std::mt19937_64& gen, std::uint64_t n) {
    return gen() % n; // bias is ~2^-60 for the tiny n used here
}

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle_inplace(std::vector<T>& v, std::mt19937_64& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rand_below(gen, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Uniform double in (0,1].
inline double uniform01(std::mt19937_64& gen) {
    return (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal draws via Box-Muller.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}
    explicit NormalSampler(std::mt19937_64& gen) : gen_(gen()) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01(gen_);
        const double u2 = uniform01(gen_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double next(double sigma) { return next() * sigma; }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace nscam

#endif
