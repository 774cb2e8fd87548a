#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trustbench/pipeline.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"trustbench: secure-coding-practice trustworthiness pipeline"};
    app.require_subcommand(1);

    std::string manifest;
    std::string strategy = "baseline";
    std::string model;
    bool replay = false;
    std::optional<int> parallelism;
    std::string qm_config;
    std::string out_dir;
    std::string run_file;
    std::vector<std::string> run_files;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--manifest", manifest, "Run manifest file")->required();
        cmd->add_option("--qm-config", qm_config, "Quality model config override");
        cmd->add_option("--out", out_dir, "Output directory override");
    };

    CLI::App* validate = app.add_subcommand("validate", "Load and cross-check all inputs");
    add_common(validate);

    CLI::App* assess = app.add_subcommand("assess", "Elicit verdicts for one model/strategy");
    add_common(assess);
    assess->add_option("--strategy", strategy, "Prompt strategy")
        ->check(CLI::IsMember({"baseline", "cwe", "callctx", "rules", "score-est"}));
    assess->add_option("--model", model, "Model id from the manifest")->required();
    assess->add_flag("--replay", replay, "Serve responses from the cache only");
    assess->add_option("--parallelism", parallelism, "Worker thread count override")
        ->check(CLI::PositiveNumber);

    CLI::App* score = app.add_subcommand("score", "Compute trustworthiness scores");
    add_common(score);
    score->add_option("--run", run_file, "Run file to score (default: ground truth reference)");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate runs against ground truth");
    add_common(eval);
    eval->add_option("--run", run_files, "Run files (default: discover under output dir)");

    CLI::App* report = app.add_subcommand("report", "Write a summary report");
    add_common(report);
    report->add_option("--run", run_files, "Run files (default: discover under output dir)");

    CLI11_PARSE(app, argc, argv);

    trustbench::ManifestOverrides overrides;
    if (!qm_config.empty()) overrides.qm_config = fs::path(qm_config);
    if (!out_dir.empty()) overrides.output_dir = fs::path(out_dir);

    std::vector<fs::path> runs(run_files.begin(), run_files.end());
    if (validate->parsed()) {
        return trustbench::cmd_validate(manifest, std::cout, std::cerr, overrides);
    }
    if (assess->parsed()) {
        return trustbench::cmd_assess(manifest, strategy, model, replay, parallelism, std::cout,
                                      std::cerr, overrides);
    }
    if (score->parsed()) {
        std::optional<fs::path> run;
        if (!run_file.empty()) run = fs::path(run_file);
        return trustbench::cmd_score(manifest, run, std::cout, std::cerr, overrides);
    }
    if (eval->parsed()) {
        return trustbench::cmd_eval(manifest, runs, std::cout, std::cerr, overrides);
    }
    return trustbench::cmd_report(manifest, runs, std::cout, std::cerr, overrides);
}
