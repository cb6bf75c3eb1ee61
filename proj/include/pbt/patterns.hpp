#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"

namespace pbt {

enum class PatternKind { Exhaustive, ZC, MultiArm, MultiArmRandomPhase, Random, Optimized };

inline std::string_view to_string(PatternKind kind)
{
    switch (kind) {
    case PatternKind::Exhaustive: return "exhaustive";
    case PatternKind::ZC: return "zc";
    case PatternKind::MultiArm: return "multiarm";
    case PatternKind::MultiArmRandomPhase: return "multiarm_random_phase";
    case PatternKind::Random: return "random";
    case PatternKind::Optimized: return "optimized";
    }
    return "unknown";
}

inline PatternKind pattern_kind_from_string(std::string_view name)
{
    for (auto kind : {PatternKind::Exhaustive, PatternKind::ZC, PatternKind::MultiArm,
                      PatternKind::MultiArmRandomPhase, PatternKind::Random, PatternKind::Optimized})
        if (to_string(kind) == name)
            return kind;
    throw ValidationError("unknown pattern kind '" + std::string(name) + "'");
}

struct PatternMeta {
    std::optional<std::size_t> arms;               // K, multi-arm designs only
    std::optional<std::uint64_t> seed;             // seeded designs only
    std::optional<std::array<double, 3>> weights;  // optimized design only
};

/// A probe pattern B (N x M, columns are the transmitted training beams) and the
/// combining pattern B~ (N x M, the UE computes y~ = B~ r).
struct PatternPair {
    ComplexMatrix probe;
    ComplexMatrix combining;
    PatternKind kind = PatternKind::Exhaustive;
    PatternMeta meta;

    std::size_t n() const { return static_cast<std::size_t>(probe.rows()); }
    std::size_t m() const { return static_cast<std::size_t>(probe.cols()); }

    // Unit-norm probe columns and combining rows, matching shapes, M <= N.
    void validate(double tol = 1e-9) const
    {
        require(probe.rows() >= 1 && probe.cols() >= 1, "PatternPair: empty probe");
        require(combining.rows() == probe.rows() && combining.cols() == probe.cols(),
                "PatternPair: probe and combining must both be N x M");
        require(probe.cols() <= probe.rows(), "PatternPair: M must not exceed N");
        for (Eigen::Index c = 0; c < probe.cols(); ++c)
            require(std::abs(probe.col(c).norm() - 1.0) < tol,
                    "PatternPair: probe column " + std::to_string(c) + " is not unit norm");
        for (Eigen::Index r = 0; r < combining.rows(); ++r)
            require(std::abs(combining.row(r).norm() - 1.0) < tol,
                    "PatternPair: combining row " + std::to_string(r) + " is not unit norm");
    }
};

/// True iff every probe weight has the same magnitude (within tol).
inline bool is_constant_modulus(const PatternPair &pair, double tol = 1e-9)
{
    const double ref = std::abs(pair.probe(0, 0));
    return (pair.probe.array().abs() - ref).abs().maxCoeff() <= tol;
}

// ---------------------------------------------------------------------------
// Gain matrix and design metrics

/// G = |B~ B^H D|^2 (elementwise). Row n is the power response of equivalent
/// training beam n across the DFT grid.
inline RealMatrix gain_matrix(const PatternPair &pair, const ComplexMatrix &codebook)
{
    require(codebook.rows() == codebook.cols() && codebook.rows() == pair.probe.rows(),
            "gain_matrix: codebook must be N x N with N matching the pattern");
    require(pair.combining.rows() == pair.probe.rows() && pair.combining.cols() == pair.probe.cols(),
            "gain_matrix: probe and combining shapes differ");
    const ComplexMatrix t = pair.combining * (pair.probe.adjoint() * codebook);
    return t.array().abs2().matrix();
}

/// Equal main-lobe gain: ||diag(G) - g 1||_2 with g the mean diagonal gain.
inline double metric_p1(const RealMatrix &g)
{
    require(g.rows() == g.cols() && g.rows() >= 1, "metric_p1: G must be square");
    const RealVector d = g.diagonal();
    const double mean = d.sum() / static_cast<double>(d.size());
    return (d.array() - mean).matrix().norm();
}

/// Sidelobe leakage: sum of off-diagonal entries of G over (N-1)^2.
inline double metric_p2(const RealMatrix &g)
{
    require(g.rows() == g.cols() && g.rows() >= 2, "metric_p2: G must be square with N >= 2");
    const double n1 = static_cast<double>(g.rows() - 1);
    return (g.sum() - g.trace()) / (n1 * n1);
}

/// Maximum sidelobe: largest off-diagonal entry of G.
inline double metric_p3(const RealMatrix &g)
{
    require(g.rows() == g.cols() && g.rows() >= 2, "metric_p3: G must be square with N >= 2");
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r)
            if (r != c)
                best = std::max(best, g(r, c));
    return best;
}

struct GainMetrics {
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
    double mean_diag_gain = 0.0;
};

inline GainMetrics gain_metrics(const RealMatrix &g)
{
    return {metric_p1(g), metric_p2(g), metric_p3(g), g.trace() / static_cast<double>(g.rows())};
}

inline GainMetrics gain_metrics(const PatternPair &pair, const ComplexMatrix &codebook)
{
    return gain_metrics(gain_matrix(pair, codebook));
}

// ---------------------------------------------------------------------------
// Constructions

/// Row-normalized D^H B. Throws DegeneratePatternError if a row vanishes.
inline ComplexMatrix combining_from_probe(const ComplexMatrix &probe, const ComplexMatrix &codebook)
{
    require(codebook.rows() == codebook.cols() && codebook.rows() == probe.rows(),
            "combining_from_probe: codebook must be N x N with N matching the probe");
    ComplexMatrix a = codebook.adjoint() * probe;
    const RealVector norms = a.rowwise().norm();
    const double scale = std::max(norms.maxCoeff(), 1e-300);
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        if (!(norms(r) > 1e-14 * scale))
            throw DegeneratePatternError("combining_from_probe: row " + std::to_string(r) +
                                         " of D^H B vanishes");
        a.row(r) /= norms(r);
    }
    return a;
}

/// Pattern 1: B = D, B~ = I.
inline PatternPair pattern_exhaustive(std::size_t n)
{
    require(n >= 1, "pattern_exhaustive: n must be positive");
    const auto size = static_cast<Eigen::Index>(n);
    PatternPair pair;
    pair.probe = dft_codebook(n);
    pair.combining = ComplexMatrix::Identity(size, size);
    pair.kind = PatternKind::Exhaustive;
    return pair;
}

/// Zadoff-Chu probe: column 0 is exp(j*pi*k^2/N)/sqrt(N), column m is that
/// sequence cyclically shifted by m*N/M. B~ = sqrt(N/M) D^H B.
///
/// Requires even N and M dividing N. The sqrt(N/M) factor yields unit combining
/// rows because a ZC sequence has a flat DFT magnitude; this is checked, not
/// enforced by renormalization.
inline PatternPair pattern_zc(std::size_t n, std::size_t m)
{
    require(m >= 1 && m <= n, "pattern_zc: need 1 <= M <= N");
    require(n % 2 == 0, "pattern_zc: the root-1 ZC sequence exp(j*pi*k^2/N) needs even N");
    require(n % m == 0, "pattern_zc: M must divide N so shifts tile the sequence evenly");
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(m);
    const std::size_t stride = n / m;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));

    ComplexVector base(rows);
    for (std::size_t k = 0; k < n; ++k) {
        const auto e = static_cast<double>((k * k) % (2 * n)); // exp(j*pi*x/N) has period 2N in x
        base(static_cast<Eigen::Index>(k)) = std::polar(scale, kPi * e / static_cast<double>(n));
    }

    PatternPair pair;
    pair.kind = PatternKind::ZC;
    pair.probe.resize(rows, cols);
    for (std::size_t c = 0; c < m; ++c)
        for (std::size_t k = 0; k < n; ++k)
            pair.probe(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
                base(static_cast<Eigen::Index>((k + n - (c * stride) % n) % n));

    pair.combining = std::sqrt(static_cast<double>(n) / static_cast<double>(m)) *
                     (dft_codebook(n).adjoint() * pair.probe);
    const RealVector row_norms = pair.combining.rowwise().norm();
    if ((row_norms.array() - 1.0).abs().maxCoeff() > 1e-9)
        throw DegeneratePatternError("pattern_zc: sqrt(N/M) D^H B does not have unit rows");
    return pair;
}

/// Sparse arm-assignment matrix C (N x M): column m holds 1/sqrt(K) on the K
/// beams of index set C_m and zeros elsewhere.
struct HashCodebook {
    RealMatrix matrix;
    std::size_t arms = 0;
    std::vector<std::vector<std::size_t>> index_sets;

    std::size_t coverage() const
    {
        return index_sets.empty() ? 0
                                  : arms * index_sets.size() / static_cast<std::size_t>(matrix.rows());
    }
};

/// Number of arms used when none is given: 8, or N/M if that is larger.
inline std::size_t default_arms(std::size_t n, std::size_t m)
{
    const std::size_t k = std::max<std::size_t>(8, m == 0 ? 1 : n / m);
    if (k <= n && n % k == 0 && (k * m) % n == 0)
        return k;
    return m == 0 ? 1 : std::max<std::size_t>(1, 2 * n / m);
}

/// Random hash codebook built from r = K*M/N independent random partitions of
/// the N beams into N/K blocks of K arms. Every beam is covered exactly r
/// times; pairs of beams may share more than one training beam.
inline HashCodebook hash_codebook(std::size_t n, std::size_t m, std::size_t k, RandomStream &rng)
{
    require(n >= 1 && m >= 1 && k >= 1, "hash_codebook: N, M, K must be positive");
    require(m <= n && k <= n, "hash_codebook: need M <= N and K <= N");
    require((k * m) % n == 0, "hash_codebook: K*M must be divisible by N");
    require(n % k == 0, "hash_codebook: K must divide N");
    const std::size_t blocks = n / k;
    require(m % blocks == 0, "hash_codebook: M must be a multiple of N/K");

    HashCodebook cb;
    cb.arms = k;
    cb.matrix = RealMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    const double value = 1.0 / std::sqrt(static_cast<double>(k));

    std::vector<std::size_t> perm(n);
    const std::size_t rounds = k * m / n;
    for (std::size_t round = 0; round < rounds; ++round) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        for (std::size_t b = 0; b < blocks; ++b) {
            std::vector<std::size_t> set(perm.begin() + static_cast<std::ptrdiff_t>(b * k),
                                         perm.begin() + static_cast<std::ptrdiff_t>((b + 1) * k));
            std::sort(set.begin(), set.end());
            const auto col = static_cast<Eigen::Index>(cb.index_sets.size());
            for (auto beam : set)
                cb.matrix(static_cast<Eigen::Index>(beam), col) = value;
            cb.index_sets.push_back(std::move(set));
        }
    }
    return cb;
}

namespace detail {

inline PatternPair pattern_from_arm_matrix(const ComplexMatrix &arms, PatternKind kind, std::size_t k)
{
    const auto n = static_cast<std::size_t>(arms.rows());
    const auto m = static_cast<std::size_t>(arms.cols());
    PatternPair pair;
    pair.kind = kind;
    pair.meta.arms = k;
    pair.probe = dft_codebook(n) * arms;
    pair.combining = std::sqrt(static_cast<double>(n) / static_cast<double>(m)) * arms;
    pair.validate();
    return pair;
}

} // namespace detail

/// Pattern 2: B = D C, B~ = sqrt(N/M) C.
inline PatternPair pattern_multiarm(const HashCodebook &cb)
{
    return detail::pattern_from_arm_matrix(cb.matrix.cast<Complex>(), PatternKind::MultiArm, cb.arms);
}

inline PatternPair pattern_multiarm(std::size_t n, std::size_t m, std::size_t k, RandomStream &rng)
{
    auto pair = pattern_multiarm(hash_codebook(n, m, k, rng));
    pair.meta.seed = rng.seed();
    return pair;
}

/// C~ = exp(j*phi) .* C.
inline ComplexMatrix phase_rotated(const HashCodebook &cb, const RealMatrix &phases)
{
    require(phases.rows() == cb.matrix.rows() && phases.cols() == cb.matrix.cols(),
            "phase_rotated: phase matrix must match the codebook shape");
    ComplexMatrix out(cb.matrix.rows(), cb.matrix.cols());
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index r = 0; r < out.rows(); ++r)
            out(r, c) = cb.matrix(r, c) * std::polar(1.0, phases(r, c));
    return out;
}

/// Pattern 3 with explicit phases: B = D C~, B~ = sqrt(N/M) C~.
inline PatternPair pattern_multiarm_random_phase(const HashCodebook &cb, const RealMatrix &phases)
{
    return detail::pattern_from_arm_matrix(phase_rotated(cb, phases), PatternKind::MultiArmRandomPhase,
                                           cb.arms);
}

/// Pattern 3: phases uniform on [0, 2*pi), one per codebook entry (column-major draw order).
inline PatternPair pattern_multiarm_random_phase(const HashCodebook &cb, RandomStream &rng)
{
    RealMatrix phases(cb.matrix.rows(), cb.matrix.cols());
    for (Eigen::Index c = 0; c < phases.cols(); ++c)
        for (Eigen::Index r = 0; r < phases.rows(); ++r)
            phases(r, c) = rng.phase();
    auto pair = pattern_multiarm_random_phase(cb, phases);
    pair.meta.seed = rng.seed();
    return pair;
}

inline PatternPair pattern_multiarm_random_phase(std::size_t n, std::size_t m, std::size_t k,
                                                 RandomStream &rng)
{
    const auto cb = hash_codebook(n, m, k, rng);
    return pattern_multiarm_random_phase(cb, rng);
}

/// Unit-modulus probe with phases given explicitly: b_{n,m} = exp(j*phi_{n,m}) / sqrt(N).
inline ComplexMatrix probe_from_phases(const RealMatrix &phases)
{
    const double scale = 1.0 / std::sqrt(static_cast<double>(phases.rows()));
    ComplexMatrix b(phases.rows(), phases.cols());
    for (Eigen::Index c = 0; c < b.cols(); ++c)
        for (Eigen::Index r = 0; r < b.rows(); ++r)
            b(r, c) = std::polar(scale, phases(r, c));
    return b;
}

/// Phases of a uniform random probe, column-major draw order.
inline RealMatrix random_phases(std::size_t n, std::size_t m, RandomStream &rng)
{
    RealMatrix phases(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index c = 0; c < phases.cols(); ++c)
        for (Eigen::Index r = 0; r < phases.rows(); ++r)
            phases(r, c) = rng.phase();
    return phases;
}

/// Pattern 4: uniform random phases, combining = row-normalized D^H B.
inline PatternPair pattern_random(std::size_t n, std::size_t m, RandomStream &rng)
{
    require(m >= 1 && m <= n, "pattern_random: need 1 <= M <= N");
    PatternPair pair;
    pair.kind = PatternKind::Random;
    pair.meta.seed = rng.seed();
    pair.probe = probe_from_phases(random_phases(n, m, rng));
    pair.combining = combining_from_probe(pair.probe, dft_codebook(n));
    return pair;
}

} // namespace pbt
