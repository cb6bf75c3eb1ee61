#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pbt {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kJ{0.0, 1.0};

// Invalid arguments or configuration. Maps to CLI exit status 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical failure such as a combining row that vanishes. Maps to CLI exit status 2.
class DegeneratePatternError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string &message)
{
    if (!condition)
        throw ValidationError(message);
}

// SplitMix64 finalizer; used to derive independent seeds for child streams.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seedable, splittable random stream.
///
/// Every stochastic operation in the library takes a stream explicitly. Child
/// streams are derived from a seed and a path of integer keys, so a trial can
/// reconstruct its own stream from (seed, snr index, trial index) without
/// touching shared state.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    {
        std::uint64_t s = mix64(seed);
        for (auto key : path)
            s = mix64(s ^ mix64(key + 0x632BE59BD9B4E019ULL));
        return RandomStream(s);
    }

    RandomStream split(std::uint64_t key) const { return derive(seed_, {key}); }

    std::uint64_t seed() const { return seed_; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi)
    {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double phase() { return uniform(0.0, 2.0 * kPi); }

    // Circularly-symmetric complex Gaussian; real and imaginary parts are N(0, variance / 2).
    Complex complex_normal(double variance)
    {
        if (variance <= 0.0)
            return {0.0, 0.0};
        std::normal_distribution<double> dist(0.0, std::sqrt(variance / 2.0));
        const double re = dist(engine_);
        const double im = dist(engine_);
        return {re, im};
    }

    std::mt19937_64 &engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace pbt
