#pragma once

// Declarative experiment runners behind the `pbt` command line tool. Each
// runner takes a JSON experiment description plus flag overrides and returns
// the exact bytes it writes, so results can be checked without touching disk.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "io.hpp"

namespace pbt::experiments {

using nlohmann::json;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
};

// file name -> contents
using Outputs = std::map<std::string, std::string>;

struct CommandResult {
    Outputs files;
    std::string summary; // human-readable, printed to stdout
};

inline json parse_config(const std::string &text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

template <typename T>
T get_or(const json &j, const char *key, T fallback)
{
    if (!j.contains(key) || j[key].is_null())
        return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception &e) {
        throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

inline OptimizerConfig optimizer_config_from(const json &j, std::uint64_t seed)
{
    OptimizerConfig cfg;
    if (j.contains("weights")) {
        const auto w = get_or<std::vector<double>>(j, "weights", {});
        require(w.size() == 3, "config: optimizer weights must have 3 entries");
        cfg.weights = {w[0], w[1], w[2]};
    }
    const auto method = get_or<std::string>(j, "method", "lbfgs");
    require(method == "lbfgs" || method == "gd", "config: optimizer method must be 'lbfgs' or 'gd'");
    cfg.method = method == "gd" ? DescentMethod::GradientDescent : DescentMethod::Lbfgs;
    cfg.history = get_or<std::size_t>(j, "history", cfg.history);
    cfg.max_iters = get_or<std::size_t>(j, "max_iters", cfg.max_iters);
    cfg.step_size = get_or<double>(j, "step_size", cfg.step_size);
    cfg.smoothing_temperature = get_or<double>(j, "tau0", cfg.smoothing_temperature);
    cfg.min_temperature = get_or<double>(j, "tau_min", cfg.min_temperature);
    cfg.anneal_every = get_or<std::size_t>(j, "anneal_every", cfg.anneal_every);
    cfg.convergence_tol = get_or<double>(j, "convergence_tol", cfg.convergence_tol);
    cfg.convergence_window = get_or<std::size_t>(j, "convergence_window", cfg.convergence_window);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

/// Builds one pattern from {kind, M, K, optimizer} (N and seed supplied by the
/// caller) or loads it from {file}. Multi-arm designs draw the index sets from
/// sub-stream 1 and the phases from sub-stream 2 of `seed`, so Patterns 2 and 3
/// built with the same seed share their index sets.
inline PatternPair build_pattern(const json &spec, std::size_t n, std::uint64_t seed)
{
    if (spec.contains("file")) {
        auto pair = load_pattern(get_or<std::string>(spec, "file", ""));
        require(pair.n() == n, "config: pattern file N does not match the experiment N");
        return pair;
    }
    const auto kind = pattern_kind_from_string(get_or<std::string>(spec, "kind", ""));
    const auto m = get_or<std::size_t>(spec, "M", n);
    switch (kind) {
    case PatternKind::Exhaustive:
        return pattern_exhaustive(n);
    case PatternKind::ZC:
        return pattern_zc(n, m);
    case PatternKind::MultiArm:
    case PatternKind::MultiArmRandomPhase: {
        const auto k = get_or<std::size_t>(spec, "K", default_arms(n, m));
        auto index_rng = RandomStream::derive(seed, {1});
        const auto cb = hash_codebook(n, m, k, index_rng);
        PatternPair pair;
        if (kind == PatternKind::MultiArm) {
            pair = pattern_multiarm(cb);
        } else {
            auto phase_rng = RandomStream::derive(seed, {2});
            pair = pattern_multiarm_random_phase(cb, phase_rng);
        }
        pair.meta.seed = seed;
        return pair;
    }
    case PatternKind::Random: {
        RandomStream rng(seed);
        return pattern_random(n, m, rng);
    }
    case PatternKind::Optimized: {
        const auto cfg = optimizer_config_from(spec.value("optimizer", json::object()), seed);
        return optimize_pattern(n, m, cfg, dft_codebook(n)).pattern;
    }
    }
    throw ValidationError("config: unsupported pattern kind");
}

inline std::uint64_t base_seed(const json &cfg, const Overrides &ov)
{
    return ov.seed ? *ov.seed : get_or<std::uint64_t>(cfg, "seed", 1);
}

// ---------------------------------------------------------------------------
// metrics

/// One CSV row per entry: mean f1, f2, f3 over the entry's seeds plus the
/// constant-modulus flag. Entry seeds are base_seed + i, i < n_seeds.
inline CommandResult cmd_metrics(const json &cfg, const Overrides &ov)
{
    const auto n = get_or<std::size_t>(cfg, "N", 256);
    const auto seed0 = base_seed(cfg, ov);
    require(cfg.contains("entries") && cfg["entries"].is_array(), "config: metrics needs an 'entries' array");
    const auto codebook = dft_codebook(n);

    std::ostringstream csv;
    csv << "pattern,N,M,K,seeds,f1,f2,f3,constant_modulus\n";
    std::ostringstream summary;
    for (const auto &entry : cfg["entries"]) {
        const auto kind = pattern_kind_from_string(get_or<std::string>(entry, "kind", ""));
        const bool seeded = kind != PatternKind::Exhaustive && kind != PatternKind::ZC;
        const std::size_t count = seeded ? get_or<std::size_t>(entry, "n_seeds", 1) : 1;
        require(count >= 1, "config: n_seeds must be >= 1");

        GainMetrics mean;
        bool constant_modulus = true;
        PatternPair last;
        for (std::size_t i = 0; i < count; ++i) {
            last = build_pattern(entry, n, seed0 + i);
            const auto g = gain_metrics(last, codebook);
            mean.f1 += g.f1 / static_cast<double>(count);
            mean.f2 += g.f2 / static_cast<double>(count);
            mean.f3 += g.f3 / static_cast<double>(count);
            constant_modulus = constant_modulus && is_constant_modulus(last);
        }
        csv << to_string(kind) << ',' << n << ',' << last.m() << ','
            << (last.meta.arms ? std::to_string(*last.meta.arms) : std::string()) << ',' << count << ','
            << format_double(mean.f1) << ',' << format_double(mean.f2) << ',' << format_double(mean.f3) << ','
            << (constant_modulus ? "Yes" : "No") << '\n';
        summary << to_string(kind) << " M=" << last.m() << ": f1=" << mean.f1 << " f2=" << mean.f2
                << " f3=" << mean.f3 << (constant_modulus ? " (constant modulus)" : "") << '\n';
    }
    return {{{"metrics.csv", csv.str()}}, summary.str()};
}

// ---------------------------------------------------------------------------
// gain

/// Dumps G and angular cuts of selected equivalent beams w_n = B b~_n next to
/// the DFT beam d_n. `oversample` > 1 evaluates the cuts between grid points.
inline CommandResult cmd_gain(const json &cfg, const Overrides &ov)
{
    const auto n = get_or<std::size_t>(cfg, "N", 16);
    const auto seed = base_seed(cfg, ov);
    require(cfg.contains("pattern"), "config: gain needs a 'pattern' object");
    const auto pair = build_pattern(cfg["pattern"], n, seed);
    const auto codebook = dft_codebook(n);
    const RealMatrix g = gain_matrix(pair, codebook);

    std::vector<std::size_t> beams;
    if (cfg.contains("beams")) {
        beams = get_or<std::vector<std::size_t>>(cfg, "beams", {});
    } else {
        for (std::size_t i = 0; i < n; ++i)
            beams.push_back(i);
    }
    const auto oversample = get_or<std::size_t>(cfg, "oversample", 1);
    require(oversample >= 1, "config: oversample must be >= 1");

    std::ostringstream cuts;
    cuts << "beam,angle,gain,dft_gain\n";
    const ComplexMatrix b_tilde_h = pair.combining.adjoint(); // column n is b~_n
    const std::size_t points = n * oversample;
    for (auto beam : beams) {
        require(beam < n, "config: beam index out of range");
        const ComplexVector w = pair.probe * b_tilde_h.col(static_cast<Eigen::Index>(beam));
        const ComplexVector d = codebook.col(static_cast<Eigen::Index>(beam));
        for (std::size_t j = 0; j < points; ++j) {
            const double theta = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(points);
            const ComplexVector a = steering_vector(theta, n);
            cuts << beam << ',' << format_double(theta) << ',' << format_double(std::norm(w.dot(a))) << ','
                 << format_double(std::norm(d.dot(a))) << '\n';
        }
    }

    const auto m = gain_metrics(g);
    std::ostringstream summary;
    summary << to_string(pair.kind) << " N=" << n << " M=" << pair.m() << ": f1=" << m.f1 << " f2=" << m.f2
            << " f3=" << m.f3 << " mean main-lobe gain=" << m.mean_diag_gain << '\n';
    return {{{"gain_matrix.csv", matrix_to_csv(g)}, {"beam_cuts.csv", cuts.str()}}, summary.str()};
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeOutcome {
    CommandResult result;
    OptimizationResult optimization;
    double exact_objective = 0.0;
};

inline OptimizeOutcome run_optimize(const json &cfg, const Overrides &ov)
{
    const auto n = get_or<std::size_t>(cfg, "N", 256);
    const auto m = get_or<std::size_t>(cfg, "M", n / 2);
    const auto ocfg = optimizer_config_from(cfg, base_seed(cfg, ov));
    OptimizeOutcome out;
    out.optimization = optimize_pattern(n, m, ocfg, dft_codebook(n));
    const auto &opt = out.optimization;
    out.exact_objective = exact_objective(opt.metrics, ocfg.weights);

    std::ostringstream summary;
    summary << "status=" << to_string(opt.status) << " iterations=" << opt.iterations
            << " objective=" << out.exact_objective << " f1=" << opt.metrics.f1 << " f2=" << opt.metrics.f2
            << " f3=" << opt.metrics.f3 << '\n';
    out.result = {{{"pattern.json", pattern_to_string(opt.pattern)}, {"trace.csv", trace_to_csv(opt.trace)}},
                  summary.str()};
    return out;
}

inline CommandResult cmd_optimize(const json &cfg, const Overrides &ov) { return run_optimize(cfg, ov).result; }

// ---------------------------------------------------------------------------
// simulate

inline double snr_from_json(const json &v)
{
    if (v.is_string()) {
        require(v.get<std::string>() == "inf", "config: SNR strings other than \"inf\" are not accepted");
        return std::numeric_limits<double>::infinity();
    }
    require(v.is_number(), "config: SNR values must be numbers or \"inf\"");
    return v.get<double>();
}

inline ChannelConfig channel_from(const json &j)
{
    ChannelConfig ch;
    ch.n_nlos_paths = get_or<std::size_t>(j, "nlos_paths", ch.n_nlos_paths);
    ch.nlos_gain_variance = get_or<double>(j, "nlos_variance", ch.nlos_gain_variance);
    const auto los_angle = get_or<std::string>(j, "los_angle", "uniform");
    require(los_angle == "uniform" || los_angle == "grid", "config: los_angle must be 'uniform' or 'grid'");
    ch.los_angle_model = los_angle == "grid" ? LosAngleModel::Grid : LosAngleModel::Uniform;
    if (j.contains("los_gain")) {
        const auto g = get_or<std::vector<double>>(j, "los_gain", {});
        require(g.size() == 2, "config: los_gain must be [re, im]");
        ch.los_gain = {g[0], g[1]};
    }
    ch.validate();
    return ch;
}

/// Builds the SimConfig for one curve of a simulate experiment.
inline SimConfig sim_config_from(const json &cfg, const json &curve, const Overrides &ov)
{
    SimConfig sim;
    sim.array.n_antennas = get_or<std::size_t>(cfg, "N", 256);
    sim.channel = channel_from(cfg.value("channel", json::object()));
    require(cfg.contains("snr_db") && cfg["snr_db"].is_array(), "config: simulate needs an 'snr_db' array");
    for (const auto &v : cfg["snr_db"])
        sim.snr_grid_db.push_back(snr_from_json(v));
    sim.trials = get_or<std::size_t>(cfg, "trials", sim.trials);
    sim.seed = base_seed(cfg, ov);
    const auto truth = get_or<std::string>(cfg, "truth", "full");
    require(truth == "full" || truth == "los", "config: truth must be 'full' or 'los'");
    sim.truth = truth == "los" ? GroundTruth::LosOnly : GroundTruth::FullChannel;

    const auto detector = get_or<std::string>(curve, "detector", "linear");
    require(detector == "linear" || detector == "omp", "config: detector must be 'linear' or 'omp'");
    sim.detector = detector == "omp" ? DetectorKind::Omp : DetectorKind::Linear;
    sim.omp_iterations = get_or<std::size_t>(curve, "omp_iterations", sim.channel.n_nlos_paths + 1);
    require(curve.contains("pattern"), "config: every curve needs a 'pattern'");
    const auto pattern_seed = get_or<std::uint64_t>(curve["pattern"], "seed", sim.seed);
    sim.pattern = build_pattern(curve["pattern"], sim.array.n_antennas, pattern_seed);
    return sim;
}

inline CommandResult cmd_simulate(const json &cfg, const Overrides &ov)
{
    require(cfg.contains("curves") && cfg["curves"].is_array(), "config: simulate needs a 'curves' array");
    std::vector<SimResult> results;
    std::ostringstream summary;
    for (const auto &curve : cfg["curves"]) {
        const Simulator sim(sim_config_from(cfg, curve, ov));
        results.push_back(sim.error_probability(ov.threads));
        const auto &r = results.back();
        summary << r.label << " M=" << r.m << ":";
        for (const auto &p : r.points)
            summary << ' ' << p.snr_db << "dB=" << p.error_probability;
        summary << '\n';
    }
    return {{{"simulate.csv", sim_to_csv(results)}}, summary.str()};
}

inline void write_outputs(const std::filesystem::path &dir, const Outputs &files)
{
    std::filesystem::create_directories(dir);
    for (const auto &[name, text] : files)
        write_text_file((dir / name).string(), text);
}

} // namespace pbt::experiments
