#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "core.hpp"

namespace pbt {

struct ArrayConfig {
    std::size_t n_antennas = 256;

    void validate() const { require(n_antennas >= 2, "ArrayConfig: need at least 2 antennas"); }
};

// Which beam counts as the ground truth n* when scoring detection.
enum class GroundTruth {
    FullChannel, // argmax_n |d_n^H h|^2 over the whole multipath channel
    LosOnly,     // argmax_n |d_n^H a(theta_0)|^2
};

// How the LoS angle theta_0 is drawn. NLoS angles are always uniform on [-1, 1].
enum class LosAngleModel {
    Uniform, // uniform on [-1, 1]
    Grid,    // uniform over the N DFT grid angles
};

/// Sparse geometric channel: one LoS path plus `n_nlos_paths` scattered paths.
struct ChannelConfig {
    std::size_t n_nlos_paths = 3;
    LosAngleModel los_angle_model = LosAngleModel::Uniform;
    Complex los_gain{1.0, 0.0};
    double nlos_gain_variance = 0.1;

    void validate() const
    {
        require(std::isfinite(nlos_gain_variance) && nlos_gain_variance >= 0.0,
                "ChannelConfig: NLoS gain variance must be finite and nonnegative");
        require(std::isfinite(los_gain.real()) && std::isfinite(los_gain.imag()),
                "ChannelConfig: LoS gain must be finite");
    }
};

struct ChannelRealization {
    ComplexVector h;
    double los_angle = 0.0;
    std::vector<double> nlos_angles;
    std::vector<Complex> gains; // gains[0] is the LoS gain, gains[p] the p-th NLoS gain
};

/// ULA steering vector a(theta), element m (0-based) = exp(-j*pi*theta*m) / sqrt(n).
inline ComplexVector steering_vector(double theta, std::size_t n)
{
    require(n >= 1, "steering_vector: n must be positive");
    require(theta >= -1.0 && theta <= 1.0, "steering_vector: theta must lie in [-1, 1]");
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    ComplexVector a(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m)
        a(static_cast<Eigen::Index>(m)) = std::polar(scale, -kPi * theta * static_cast<double>(m));
    return a;
}

/// N-point DFT codebook; entry (m, k) = exp(-j*2*pi*k*m/N) / sqrt(N). Column k is beam k.
inline ComplexMatrix dft_codebook(std::size_t n)
{
    require(n >= 1, "dft_codebook: n must be positive");
    const auto size = static_cast<Eigen::Index>(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    ComplexMatrix d(size, size);
    for (Eigen::Index k = 0; k < size; ++k) {
        for (Eigen::Index m = 0; m < size; ++m) {
            // reduce the exponent mod n before scaling so large n keeps full accuracy
            const auto e = static_cast<double>((k * m) % size);
            d(m, k) = std::polar(scale, -2.0 * kPi * e / static_cast<double>(n));
        }
    }
    return d;
}

/// Spatial frequency of DFT column k (0-based): 2k/N wrapped into [-1, 1).
inline double grid_angle(std::size_t k, std::size_t n)
{
    double theta = 2.0 * static_cast<double>(k) / static_cast<double>(n);
    if (theta >= 1.0)
        theta -= 2.0;
    return theta;
}

inline ChannelRealization sample_channel(const ChannelConfig &cfg, const ArrayConfig &array,
                                         RandomStream &rng)
{
    cfg.validate();
    array.validate();
    const std::size_t n = array.n_antennas;

    ChannelRealization out;
    if (cfg.los_angle_model == LosAngleModel::Grid) {
        const auto k = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng.engine());
        out.los_angle = grid_angle(k, n);
    } else {
        out.los_angle = rng.uniform(-1.0, 1.0);
    }
    out.gains.push_back(cfg.los_gain);
    out.h = cfg.los_gain * steering_vector(out.los_angle, n);
    for (std::size_t p = 0; p < cfg.n_nlos_paths; ++p) {
        const double theta = rng.uniform(-1.0, 1.0);
        const Complex alpha = rng.complex_normal(cfg.nlos_gain_variance);
        out.nlos_angles.push_back(theta);
        out.gains.push_back(alpha);
        out.h += alpha * steering_vector(theta, n);
    }
    return out;
}

/// Index of the largest |y_n|^2; ties go to the smallest index.
inline std::size_t argmax_power(const ComplexVector &y)
{
    require(y.size() > 0, "detect: empty input");
    std::size_t best = 0;
    double best_power = std::norm(y(0));
    for (Eigen::Index i = 1; i < y.size(); ++i) {
        const double p = std::norm(y(i));
        if (p > best_power) {
            best_power = p;
            best = static_cast<std::size_t>(i);
        }
    }
    return best;
}

/// Ground-truth beam: argmax over codebook columns d_n of |d_n^H h|^2 (0-based index).
inline std::size_t optimal_beam_index(const ComplexVector &h, const ComplexMatrix &codebook)
{
    require(codebook.rows() == h.size() && codebook.cols() >= 1,
            "optimal_beam_index: codebook rows must match channel length");
    return argmax_power(codebook.adjoint() * h);
}

inline std::size_t optimal_beam_index(const ChannelRealization &ch, const ComplexMatrix &codebook,
                                      GroundTruth truth)
{
    if (truth == GroundTruth::LosOnly)
        return optimal_beam_index(steering_vector(ch.los_angle, static_cast<std::size_t>(ch.h.size())),
                                  codebook);
    return optimal_beam_index(ch.h, codebook);
}

} // namespace pbt
