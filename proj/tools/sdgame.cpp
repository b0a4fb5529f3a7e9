#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "sdg/errors.hpp"
#include "sdg/experiment.hpp"
#include "sdg/presets.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir,
            bool strict, int threads) {
    sdg::ExperimentConfig cfg = sdg::load_experiment_config(config_path);
    const sdg::ExperimentResult res = sdg::run_experiment(cfg, out_dir, threads);
    for (const sdg::StageOutcome& s : res.stages) {
        std::printf("%-18s %-6s %9.1f ms\n", s.stage.c_str(), s.status.c_str(),
                    s.wall_ms);
        if (!s.error.empty()) std::printf("  error: %s\n", s.error.c_str());
        for (const auto& kv : s.verdicts)
            std::printf("  %s: %s\n", kv.first.c_str(), kv.second.c_str());
    }
    std::printf("artifacts: %s\n", res.out_dir.c_str());
    return res.exit_code(strict);
}

int cmd_list_presets() {
    for (const std::string& name : sdg::preset_names()) {
        const sdg::Preset p = sdg::make_preset(name);
        std::printf("%-16s %s\n", name.c_str(), p.description.c_str());
    }
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const sdg::ExperimentConfig cfg = sdg::load_experiment_config(config_path);
    std::printf("ok: %s (%s), %zu stage(s)\n", cfg.name.c_str(),
                cfg.problem_source.c_str(), cfg.pipeline.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-sum stochastic differential game laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    bool strict = false;
    int threads = 1;

    CLI::App* run = app.add_subcommand("run", "execute an experiment pipeline");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--strict", strict, "treat inconclusive verdicts as failures");
    run->add_option("--threads", threads, "parallelism degree");

    app.add_subcommand("list-presets", "list the built-in problems");

    std::string validate_path;
    CLI::App* validate =
        app.add_subcommand("validate", "parse and check a config, run nothing");
    validate->add_option("config", validate_path, "experiment config (JSON)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, strict, threads);
        if (validate->parsed()) return cmd_validate(validate_path);
        return cmd_list_presets();
    } catch (const sdg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
