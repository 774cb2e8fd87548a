#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trustbench/analytics.hpp"
#include "trustbench/corpus.hpp"
#include "trustbench/gateway.hpp"
#include "trustbench/practices.hpp"
#include "trustbench/prompting.hpp"
#include "trustbench/quality_model.hpp"

namespace trustbench {

extern const char* kToolVersion;

// The top-level run manifest wiring every input together. All referenced
// paths are resolved relative to the manifest file.
struct RunManifest {
    std::filesystem::path manifest_path;
    std::filesystem::path corpus;
    std::filesystem::path catalog;
    std::filesystem::path templates_dir;
    std::filesystem::path ground_truth;
    std::filesystem::path cache;
    std::optional<std::filesystem::path> call_graph;   // external import
    std::optional<std::filesystem::path> qm_config;
    std::optional<std::filesystem::path> cve_counts;   // weight derivation input
    std::vector<ModelProfile> models;
    std::vector<PromptStrategy> strategies;
    std::filesystem::path output_dir;
    unsigned long seed = 0;
    int parallelism = 4;
    int context_depth = 1;

    const ModelProfile& profile_for(const std::string& model_id) const;
};

RunManifest load_run_manifest(const std::filesystem::path& path);

// Command-line overrides applied on top of the manifest.
struct ManifestOverrides {
    std::optional<std::filesystem::path> qm_config;
    std::optional<std::filesystem::path> output_dir;
};

// Everything loaded and cross-validated; immutable afterwards.
struct PipelineContext {
    RunManifest manifest;
    Corpus corpus;
    Catalog catalog;
    GroundTruthMatrix truth;
    PromptRenderer renderer;
    CallGraph graph;
    QualityModelConfig qm;

    static PipelineContext load(const std::filesystem::path& manifest_path,
                                const ManifestOverrides& overrides = {});
};

// Subcommands. Exit codes: 0 success, 1 runtime failure, 2 validation failure.
int cmd_validate(const std::filesystem::path& manifest_path, std::ostream& out,
                 std::ostream& err, const ManifestOverrides& overrides = {});
int cmd_assess(const std::filesystem::path& manifest_path, const std::string& strategy_name,
               const std::string& model_id, bool force_replay, std::optional<int> parallelism,
               std::ostream& out, std::ostream& err, const ManifestOverrides& overrides = {});
int cmd_score(const std::filesystem::path& manifest_path,
              const std::optional<std::filesystem::path>& run_file, std::ostream& out,
              std::ostream& err, const ManifestOverrides& overrides = {});
int cmd_eval(const std::filesystem::path& manifest_path,
             std::vector<std::filesystem::path> run_files, std::ostream& out, std::ostream& err,
             const ManifestOverrides& overrides = {});
int cmd_report(const std::filesystem::path& manifest_path,
               std::vector<std::filesystem::path> run_files, std::ostream& out,
               std::ostream& err, const ManifestOverrides& overrides = {});

// Run files under <output_dir>/runs, sorted for determinism.
std::vector<std::filesystem::path> discover_runs(const RunManifest& manifest);

}  // namespace trustbench
