#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "patterns.hpp"

namespace pbt {

enum class DetectorKind {
    Linear, // y~ = B~ r, then argmax
    Omp,    // orthogonal matching pursuit on r with dictionary B^H D
};

struct SimConfig {
    ArrayConfig array;
    ChannelConfig channel;
    PatternPair pattern;
    std::vector<double> snr_grid_db;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    DetectorKind detector = DetectorKind::Linear;
    std::size_t omp_iterations = 4;
    GroundTruth truth = GroundTruth::FullChannel;

    void validate() const
    {
        array.validate();
        channel.validate();
        require(trials >= 1, "SimConfig: trials must be >= 1");
        require(!snr_grid_db.empty(), "SimConfig: SNR grid must not be empty");
        for (double s : snr_grid_db)
            require(std::isfinite(s) || s == std::numeric_limits<double>::infinity(),
                    "SimConfig: SNR values must be finite or +inf (noise-free)");
        require(pattern.n() == array.n_antennas, "SimConfig: pattern N differs from the array size");
        pattern.validate();
        if (detector == DetectorKind::Omp)
            require(omp_iterations >= 1 && omp_iterations <= pattern.m(),
                    "SimConfig: OMP iterations must lie in [1, M]");
    }
};

/// Noise variance for a per-pilot SNR in dB: sigma^2 = 10^(-snr/10). +inf maps to 0.
inline double noise_variance_from_snr_db(double snr_db)
{
    if (snr_db == std::numeric_limits<double>::infinity())
        return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
}

inline ComplexVector complex_noise(Eigen::Index size, double sigma2, RandomStream &rng)
{
    ComplexVector z(size);
    for (Eigen::Index i = 0; i < size; ++i)
        z(i) = rng.complex_normal(sigma2);
    return z;
}

/// Exhaustive sweep reception y = D^H h + v.
inline ComplexVector receive_exhaustive(const ComplexVector &h, const ComplexMatrix &codebook, double sigma2,
                                        RandomStream &rng)
{
    require(sigma2 >= 0.0, "receive_exhaustive: noise variance must be >= 0");
    require(codebook.rows() == h.size(), "receive_exhaustive: dimension mismatch");
    return codebook.adjoint() * h + complex_noise(codebook.cols(), sigma2, rng);
}

/// Probe reception r = B^H h + z.
inline ComplexVector receive_probe(const ComplexVector &h, const PatternPair &pair, double sigma2,
                                   RandomStream &rng)
{
    require(sigma2 >= 0.0, "receive_probe: noise variance must be >= 0");
    require(pair.probe.rows() == h.size(), "receive_probe: dimension mismatch");
    return pair.probe.adjoint() * h + complex_noise(pair.probe.cols(), sigma2, rng);
}

/// y~ = B~ r.
inline ComplexVector combine(const PatternPair &pair, const ComplexVector &r)
{
    require(pair.combining.cols() == r.size(), "combine: r must have M entries");
    return pair.combining * r;
}

/// argmax_n |y_n|^2, ties to the smallest index.
inline std::size_t detect(const ComplexVector &y_tilde)
{
    return argmax_power(y_tilde);
}

/// OMP beam detection.
///
/// Dictionary A = B^H D. Atoms are picked by |a_i^H res| / ||a_i||; the
/// coefficients come from least squares on the unnormalized atoms. Returns the
/// support index whose final coefficient has the largest magnitude. If adding an
/// atom makes the support rank deficient, that atom is dropped and the
/// iteration stops.
inline std::size_t omp_detect(const ComplexVector &r, const ComplexMatrix &dictionary, std::size_t iterations)
{
    const Eigen::Index m = dictionary.rows();
    const Eigen::Index n = dictionary.cols();
    require(r.size() == m, "omp_detect: r must have M entries");
    require(iterations >= 1 && iterations <= static_cast<std::size_t>(m),
            "omp_detect: iterations must lie in [1, M]");

    const RealVector atom_norms = dictionary.colwise().norm().transpose();
    std::vector<Eigen::Index> support;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    ComplexVector residual = r;
    ComplexVector coeffs;

    for (std::size_t it = 0; it < iterations; ++it) {
        const ComplexVector corr = dictionary.adjoint() * residual;
        Eigen::Index best = -1;
        double best_score = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (used[static_cast<std::size_t>(i)] || atom_norms(i) <= 0.0)
                continue;
            const double score = std::abs(corr(i)) / atom_norms(i);
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best < 0)
            break;

        support.push_back(best);
        ComplexMatrix sub(m, static_cast<Eigen::Index>(support.size()));
        for (std::size_t s = 0; s < support.size(); ++s)
            sub.col(static_cast<Eigen::Index>(s)) = dictionary.col(support[s]);
        Eigen::ColPivHouseholderQR<ComplexMatrix> qr(sub);
        if (qr.rank() < sub.cols()) {
            support.pop_back();
            break;
        }
        used[static_cast<std::size_t>(best)] = true;
        coeffs = qr.solve(r);
        residual = r - sub * coeffs;
    }

    require(!support.empty(), "omp_detect: dictionary has no usable atoms");
    std::size_t pick = 0;
    for (std::size_t s = 1; s < support.size(); ++s)
        if (std::abs(coeffs(static_cast<Eigen::Index>(s))) > std::abs(coeffs(static_cast<Eigen::Index>(pick))))
            pick = s;
    return static_cast<std::size_t>(support[pick]);
}

inline std::size_t omp_detect(const ComplexVector &r, const PatternPair &pair, const ComplexMatrix &codebook,
                              std::size_t iterations)
{
    require(codebook.rows() == pair.probe.rows(), "omp_detect: codebook does not match the pattern");
    return omp_detect(r, ComplexMatrix(pair.probe.adjoint() * codebook), iterations);
}

struct TrialOutcome {
    std::size_t n_hat = 0;
    std::size_t n_star = 0;
    bool correct = false;
};

struct SnrPoint {
    double snr_db = 0.0;
    std::size_t trials = 0;
    std::size_t errors = 0;
    double error_probability = 0.0;
    double ci_halfwidth = 0.0;
};

struct SimResult {
    std::string label; // pattern kind, or "omp" for the OMP detector
    std::size_t n = 0;
    std::size_t m = 0;
    std::uint64_t seed = 0;
    std::vector<SnrPoint> points;
};

/// Half-width of the Wilson score interval (95% by default).
inline double wilson_halfwidth(std::size_t errors, std::size_t trials, double z = 1.959963984540054)
{
    if (trials == 0)
        return 0.0;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    return z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
}

/// Wilson score interval center, used when comparing curves.
inline double wilson_center(std::size_t errors, std::size_t trials, double z = 1.959963984540054)
{
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(errors) / n;
    return (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
}

/// Holds a validated configuration with the matrices every trial reuses.
class Simulator {
public:
    explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg))
    {
        cfg_.validate();
        codebook_ = dft_codebook(cfg_.array.n_antennas);
        if (cfg_.detector == DetectorKind::Omp)
            dictionary_ = cfg_.pattern.probe.adjoint() * codebook_;
    }

    const SimConfig &config() const { return cfg_; }
    const ComplexMatrix &codebook() const { return codebook_; }

    /// One trial. The stream is derived from (seed, snr index, trial index), so the
    /// outcome does not depend on which worker runs it or in what order.
    TrialOutcome run_trial(std::size_t snr_index, std::size_t trial_index) const
    {
        require(snr_index < cfg_.snr_grid_db.size(), "run_trial: SNR index out of range");
        auto rng = RandomStream::derive(cfg_.seed, {snr_index, trial_index});
        const double sigma2 = noise_variance_from_snr_db(cfg_.snr_grid_db[snr_index]);

        const auto channel = sample_channel(cfg_.channel, cfg_.array, rng);
        TrialOutcome out;
        out.n_star = optimal_beam_index(channel, codebook_, cfg_.truth);
        const ComplexVector r = receive_probe(channel.h, cfg_.pattern, sigma2, rng);
        if (cfg_.detector == DetectorKind::Omp)
            out.n_hat = omp_detect(r, dictionary_, cfg_.omp_iterations);
        else
            out.n_hat = detect(combine(cfg_.pattern, r));
        out.correct = out.n_hat == out.n_star;
        return out;
    }

    std::size_t count_errors(std::size_t snr_index, std::size_t first, std::size_t last) const
    {
        std::size_t errors = 0;
        for (std::size_t t = first; t < last; ++t)
            errors += run_trial(snr_index, t).correct ? 0 : 1;
        return errors;
    }

    /// Error probability per SNR point. `threads` = 0 uses the hardware concurrency.
    SimResult error_probability(std::size_t threads = 1) const
    {
        if (threads == 0)
            threads = std::max(1u, std::thread::hardware_concurrency());
        threads = std::min(threads, cfg_.trials);

        SimResult result;
        result.label = cfg_.detector == DetectorKind::Omp ? std::string("omp")
                                                          : std::string(to_string(cfg_.pattern.kind));
        result.n = cfg_.array.n_antennas;
        result.m = cfg_.pattern.m();
        result.seed = cfg_.seed;

        for (std::size_t s = 0; s < cfg_.snr_grid_db.size(); ++s) {
            std::vector<std::size_t> partial(threads, 0);
            if (threads == 1) {
                partial[0] = count_errors(s, 0, cfg_.trials);
            } else {
                std::vector<std::thread> workers;
                const std::size_t chunk = (cfg_.trials + threads - 1) / threads;
                for (std::size_t w = 0; w < threads; ++w) {
                    const std::size_t first = std::min(cfg_.trials, w * chunk);
                    const std::size_t last = std::min(cfg_.trials, first + chunk);
                    workers.emplace_back([this, s, first, last, &partial, w] {
                        partial[w] = count_errors(s, first, last);
                    });
                }
                for (auto &t : workers)
                    t.join();
            }
            SnrPoint point;
            point.snr_db = cfg_.snr_grid_db[s];
            point.trials = cfg_.trials;
            for (auto e : partial)
                point.errors += e;
            point.error_probability = static_cast<double>(point.errors) / static_cast<double>(point.trials);
            point.ci_halfwidth = wilson_halfwidth(point.errors, point.trials);
            result.points.push_back(point);
        }
        return result;
    }

private:
    SimConfig cfg_;
    ComplexMatrix codebook_;
    ComplexMatrix dictionary_;
};

inline TrialOutcome run_trial(const SimConfig &cfg, std::size_t snr_index, std::size_t trial_index)
{
    return Simulator(cfg).run_trial(snr_index, trial_index);
}

inline SimResult error_probability(const SimConfig &cfg, std::size_t threads = 1)
{
    return Simulator(cfg).error_probability(threads);
}

} // namespace pbt
