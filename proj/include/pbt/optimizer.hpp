#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "patterns.hpp"

namespace pbt {

/// Per-entry probe phases phi_{n,m}; the probe is exp(j*phi) / sqrt(N).
struct PhaseField {
    RealMatrix phases;

    std::size_t n() const { return static_cast<std::size_t>(phases.rows()); }
    std::size_t m() const { return static_cast<std::size_t>(phases.cols()); }
};

/// Settings for the constant-modulus pattern optimization.
///
/// `step_size` is the largest plain gradient step (and the first L-BFGS step
/// after a memory reset); L-BFGS steps start at 1 along the quasi-Newton direction.
///
/// The max-sidelobe term is replaced by a log-sum-exp soft-max at temperature
/// tau and the main-lobe spread term by sqrt(f1^2 + tau^2). Both surrogates are
/// upper bounds that tighten as tau decreases; tau starts at
/// `smoothing_temperature` and halves every `anneal_every` iterations until it
/// reaches `min_temperature`.
enum class DescentMethod { GradientDescent, Lbfgs };

struct OptimizerConfig {
    std::array<double, 3> weights{1.0, 1.0, 1.0};
    DescentMethod method = DescentMethod::Lbfgs;
    std::size_t history = 10; // L-BFGS memory
    std::size_t max_iters = 2000;
    double step_size = 1.0;
    double smoothing_temperature = 0.05;
    double min_temperature = 1e-3;
    std::size_t anneal_every = 100;
    double convergence_tol = 1e-7;
    std::size_t convergence_window = 10;
    std::uint64_t seed = 1;

    void validate() const
    {
        for (double w : weights)
            require(std::isfinite(w) && w >= 0.0, "OptimizerConfig: weights must be finite and >= 0");
        require(weights[0] + weights[1] + weights[2] > 0.0, "OptimizerConfig: weights must not all be zero");
        require(step_size > 0.0 && std::isfinite(step_size), "OptimizerConfig: step_size must be positive");
        require(smoothing_temperature > 0.0 && min_temperature > 0.0 &&
                    min_temperature <= smoothing_temperature,
                "OptimizerConfig: need 0 < min_temperature <= smoothing_temperature");
        require(convergence_tol > 0.0, "OptimizerConfig: convergence_tol must be positive");
        require(convergence_window >= 1, "OptimizerConfig: convergence_window must be >= 1");
        require(method == DescentMethod::GradientDescent || history >= 1, "OptimizerConfig: L-BFGS needs history >= 1");
    }
};

struct ObjectiveEvaluation {
    double value = 0.0;      // weighted surrogate objective at the given temperature
    GainMetrics metrics;     // true f1, f2, f3
    RealMatrix gradient;     // d value / d phi; empty unless requested
};

/// Evaluates the smoothed design objective and optionally its gradient.
///
/// With A = D^H B and K = A A^H, the gain matrix is G_{n,n'} = |K_{n,n'}|^2 / K_{n,n},
/// which is what |B~ B^H D|^2 reduces to once B~ is the row-normalized A. The
/// gradient is back-propagated through that map in closed form.
inline ObjectiveEvaluation evaluate_objective(const RealMatrix &phases, const OptimizerConfig &cfg,
                                              const ComplexMatrix &codebook, double tau,
                                              bool with_gradient)
{
    cfg.validate();
    require(tau > 0.0, "objective: temperature must be positive");
    const Eigen::Index n = phases.rows();
    require(n >= 2 && phases.cols() >= 1 && phases.cols() <= n, "objective: need N >= 2 and 1 <= M <= N");
    require(codebook.rows() == n && codebook.cols() == n, "objective: codebook must be N x N");
    require(phases.allFinite(), "objective: phases must be finite");

    const auto [l1, l2, l3] = cfg.weights;
    const ComplexMatrix b = probe_from_phases(phases);
    const ComplexMatrix a = codebook.adjoint() * b;
    const ComplexMatrix k = a * a.adjoint();
    const RealVector kd = k.diagonal().real();
    if (!(kd.minCoeff() > 1e-14 * kd.maxCoeff()))
        throw DegeneratePatternError("objective: a row of D^H B vanishes");

    RealMatrix g = k.array().abs2().matrix();
    for (Eigen::Index r = 0; r < n; ++r)
        g.row(r) /= kd(r);

    const double nd = static_cast<double>(n);
    const double mean_diag = kd.sum() / nd;
    const RealVector spread = (kd.array() - mean_diag).matrix();
    const double f1 = spread.norm();
    const double f1_smooth = std::sqrt(f1 * f1 + tau * tau);
    const double leak_scale = 1.0 / ((nd - 1.0) * (nd - 1.0));
    const double f2 = (g.sum() - g.trace()) * leak_scale;

    double f3 = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r)
            if (r != c)
                f3 = std::max(f3, g(r, c));

    // log-sum-exp over off-diagonal entries, shifted by the max
    RealMatrix soft = ((g.array() - f3) / tau).exp().matrix();
    soft.diagonal().setZero();
    const double soft_sum = soft.sum();
    const double f3_smooth = f3 + tau * std::log(soft_sum);

    ObjectiveEvaluation out;
    out.value = l1 * f1_smooth + l2 * f2 + l3 * f3_smooth;
    out.metrics = {f1, f2, f3, mean_diag};
    if (!with_gradient)
        return out;

    // dL/dG
    RealMatrix w = RealMatrix::Constant(n, n, l2 * leak_scale) + (l3 / soft_sum) * soft;
    w.diagonal() = (l1 / f1_smooth) * spread;

    // dL = Re sum F_{ij} dK_{ij}, with G_ij = |K_ij|^2 / K_ii
    ComplexMatrix f(n, n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r)
            f(r, c) = 2.0 * w(r, c) * std::conj(k(r, c)) / kd(r);
    const RealVector row_weight = (w.array() * g.array()).rowwise().sum().matrix();
    for (Eigen::Index r = 0; r < n; ++r)
        f(r, r) -= row_weight(r) / kd(r);

    // through K = A A^H and A = D^H B, then B = exp(j phi)/sqrt(N)
    const ComplexMatrix f_sym = f + f.adjoint();
    const ComplexMatrix x = f_sym * a.conjugate();
    const ComplexMatrix y = codebook.conjugate() * x;
    out.gradient = -(y.array() * b.array()).imag().matrix();
    return out;
}

inline double objective(const PhaseField &phi, const OptimizerConfig &cfg, const ComplexMatrix &codebook)
{
    return evaluate_objective(phi.phases, cfg, codebook, cfg.smoothing_temperature, false).value;
}

inline RealMatrix gradient(const PhaseField &phi, const OptimizerConfig &cfg, const ComplexMatrix &codebook)
{
    return evaluate_objective(phi.phases, cfg, codebook, cfg.smoothing_temperature, true).gradient;
}

/// Weighted objective with the exact (non-smoothed) metrics.
inline double exact_objective(const GainMetrics &m, const std::array<double, 3> &weights)
{
    return weights[0] * m.f1 + weights[1] * m.f2 + weights[2] * m.f3;
}

struct TraceRow {
    std::size_t iteration = 0;
    double objective = 0.0; // surrogate objective at `temperature`
    double f1 = 0.0;
    double f2 = 0.0;
    double f3 = 0.0;
    double temperature = 0.0;
};

enum class OptimizerStatus { Converged, IterationCap };

inline std::string_view to_string(OptimizerStatus s)
{
    return s == OptimizerStatus::Converged ? "converged" : "iteration_cap";
}

struct OptimizationResult {
    PhaseField phases;
    PatternPair pattern;
    std::vector<TraceRow> trace;
    OptimizerStatus status = OptimizerStatus::IterationCap;
    std::size_t iterations = 0;
    GainMetrics metrics;

    double initial_objective() const { return trace.front().objective; }
    double final_objective() const { return trace.back().objective; }
};

namespace detail {

inline double dot(const RealMatrix &a, const RealMatrix &b) { return a.cwiseProduct(b).sum(); }

/// Limited-memory BFGS two-loop recursion: returns -H g for the stored pairs.
class LbfgsMemory {
public:
    explicit LbfgsMemory(std::size_t capacity) : capacity_(capacity) {}

    void clear()
    {
        s_.clear();
        y_.clear();
    }

    void push(RealMatrix s, RealMatrix y)
    {
        const double sy = dot(s, y);
        if (!(sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))))
            return; // curvature condition fails; skip the pair
        if (s_.size() == capacity_) {
            s_.erase(s_.begin());
            y_.erase(y_.begin());
        }
        s_.push_back(std::move(s));
        y_.push_back(std::move(y));
    }

    RealMatrix direction(const RealMatrix &g) const
    {
        RealMatrix q = g;
        const std::size_t k = s_.size();
        std::vector<double> alpha(k), rho(k);
        for (std::size_t i = k; i-- > 0;) {
            rho[i] = 1.0 / dot(y_[i], s_[i]);
            alpha[i] = rho[i] * dot(s_[i], q);
            q -= alpha[i] * y_[i];
        }
        if (k > 0)
            q *= dot(s_.back(), y_.back()) / dot(y_.back(), y_.back());
        for (std::size_t i = 0; i < k; ++i) {
            const double beta = rho[i] * dot(y_[i], q);
            q += (alpha[i] - beta) * s_[i];
        }
        return -q;
    }

    bool empty() const { return s_.empty(); }

private:
    std::size_t capacity_;
    std::vector<RealMatrix> s_;
    std::vector<RealMatrix> y_;
};

} // namespace detail

/// Descent on the phases starting from `initial`.
///
/// Every accepted step satisfies the Armijo condition, so the surrogate
/// objective recorded in the trace never increases (annealing only lowers it).
/// Gradient descent tries min(2 * last step, step_size) along -g; L-BFGS tries
/// a unit step along its quasi-Newton direction (step_size on the first one
/// after a reset). Both halve on failure. Stops when the relative decrease over
/// `convergence_window` iterations at the final temperature falls below
/// `convergence_tol`, when no decreasing step exists at the final temperature,
/// or at `max_iters`.
inline OptimizationResult optimize_phases(const PhaseField &initial, const OptimizerConfig &cfg,
                                          const ComplexMatrix &codebook)
{
    cfg.validate();
    constexpr double min_step = 1e-14;
    constexpr double armijo = 1e-4;

    RealMatrix phi = initial.phases;
    double tau = cfg.smoothing_temperature;
    auto current = evaluate_objective(phi, cfg, codebook, tau, true);
    detail::LbfgsMemory memory(cfg.history);

    OptimizationResult result;
    auto record = [&](std::size_t it) {
        result.trace.push_back({it, current.value, current.metrics.f1, current.metrics.f2,
                                current.metrics.f3, tau});
    };
    auto anneal = [&] {
        tau = std::max(0.5 * tau, cfg.min_temperature);
        current = evaluate_objective(phi, cfg, codebook, tau, true);
        memory.clear();
    };
    record(0);

    double step = cfg.step_size;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        if (tau > cfg.min_temperature && it > 1 && cfg.anneal_every > 0 && (it - 1) % cfg.anneal_every == 0)
            anneal();

        RealMatrix direction;
        double s = 0.0;
        if (cfg.method == DescentMethod::Lbfgs && !memory.empty()) {
            direction = memory.direction(current.gradient);
            s = 1.0;
            if (!(detail::dot(direction, current.gradient) < 0.0)) {
                memory.clear();
                direction = -current.gradient;
                s = cfg.step_size;
            }
        } else {
            direction = -current.gradient;
            s = cfg.method == DescentMethod::Lbfgs ? cfg.step_size : std::min(2.0 * step, cfg.step_size);
        }
        const double slope = detail::dot(direction, current.gradient);

        RealMatrix candidate;
        while (s >= min_step) {
            candidate = phi + s * direction;
            const double value = evaluate_objective(candidate, cfg, codebook, tau, false).value;
            if (value < current.value && value <= current.value + armijo * s * slope)
                break;
            s *= 0.5;
        }

        if (s < min_step) {
            // no descent step at this temperature: a (smoothed) stationary point
            if (tau <= cfg.min_temperature) {
                result.status = OptimizerStatus::Converged;
                break;
            }
            anneal();
            record(it);
            continue;
        }

        step = s;
        auto next = evaluate_objective(candidate, cfg, codebook, tau, true);
        if (cfg.method == DescentMethod::Lbfgs)
            memory.push(candidate - phi, next.gradient - current.gradient);
        phi = std::move(candidate);
        current = std::move(next);
        record(it);

        const std::size_t window = cfg.convergence_window;
        if (tau <= cfg.min_temperature && result.trace.size() > window) {
            const auto &past = result.trace[result.trace.size() - 1 - window];
            if (past.temperature <= cfg.min_temperature) {
                const double decrease = past.objective - current.value;
                if (decrease < cfg.convergence_tol * std::abs(past.objective)) {
                    result.status = OptimizerStatus::Converged;
                    break;
                }
            }
        }
    }

    result.iterations = result.trace.back().iteration;
    result.phases.phases = phi;
    result.metrics = current.metrics;

    result.pattern.kind = PatternKind::Optimized;
    result.pattern.meta.seed = cfg.seed;
    result.pattern.meta.weights = cfg.weights;
    result.pattern.probe = probe_from_phases(phi);
    result.pattern.combining = combining_from_probe(result.pattern.probe, codebook);
    result.pattern.validate();
    return result;
}

/// Pattern 5: optimize from the Pattern 4 draw for `cfg.seed`.
inline OptimizationResult optimize_pattern(std::size_t n, std::size_t m, const OptimizerConfig &cfg,
                                           const ComplexMatrix &codebook)
{
    require(m >= 1 && m <= n, "optimize_pattern: need 1 <= M <= N");
    RandomStream rng(cfg.seed);
    return optimize_phases(PhaseField{random_phases(n, m, rng)}, cfg, codebook);
}

} // namespace pbt
