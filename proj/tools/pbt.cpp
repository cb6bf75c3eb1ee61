#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pbt/experiments.hpp"

namespace {

using pbt::experiments::CommandResult;
using pbt::experiments::json;
using pbt::experiments::Overrides;

using Runner = CommandResult (*)(const json &, const Overrides &);

struct CommonFlags {
    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

void add_common(CLI::App *cmd, CommonFlags &flags)
{
    cmd->add_option("--config", flags.config, "Experiment description (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", flags.seed, "Override the config seed");
    cmd->add_option("--threads", flags.threads, "Worker threads for Monte Carlo trials (0 = all cores)")
        ->capture_default_str();
}

int run(Runner runner, const CommonFlags &flags, bool seed_given)
{
    const auto cfg = pbt::experiments::parse_config(pbt::read_text_file(flags.config));
    Overrides ov;
    if (seed_given)
        ov.seed = flags.seed;
    ov.threads = flags.threads;
    const auto result = runner(cfg, ov);
    pbt::experiments::write_outputs(flags.out, result.files);
    std::cout << result.summary;
    for (const auto &[name, text] : result.files)
        std::cout << "wrote " << (std::filesystem::path(flags.out) / name).string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Patterned beam training: pattern design, metrics and beam-alignment simulation"};
    app.require_subcommand(1);

    struct Entry {
        const char *name;
        const char *help;
        Runner runner;
        CommonFlags flags;
        CLI::App *cmd = nullptr;
    };
    Entry entries[] = {
        {"metrics", "Main-lobe / leakage / max-sidelobe metrics per pattern design",
         &pbt::experiments::cmd_metrics, {}},
        {"gain", "Gain matrix and equivalent-beam angular cuts for one pattern", &pbt::experiments::cmd_gain, {}},
        {"optimize", "Optimize a constant-modulus pattern; writes pattern.json and trace.csv",
         &pbt::experiments::cmd_optimize, {}},
        {"simulate", "Monte Carlo beam-alignment error probability vs SNR", &pbt::experiments::cmd_simulate, {}},
    };
    for (auto &e : entries) {
        e.cmd = app.add_subcommand(e.name, e.help);
        add_common(e.cmd, e.flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        for (auto &e : entries)
            if (e.cmd->parsed())
                return run(e.runner, e.flags, e.cmd->count("--seed") > 0);
    } catch (const pbt::DegeneratePatternError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const pbt::ValidationError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
