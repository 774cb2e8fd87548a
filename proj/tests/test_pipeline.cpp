#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "trustbench/errors.hpp"
#include "trustbench/pipeline.hpp"

using namespace trustbench;
namespace fs = std::filesystem;

namespace {

const char* kManifest = TB_SOURCE_DIR "/fixtures/demo/manifest.json";

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("run manifest loads with resolved paths and overrides") {
    RunManifest manifest = load_run_manifest(kManifest);
    CHECK(manifest.models.size() == 1);
    CHECK(manifest.models[0].provider_kind == ProviderKind::Replay);
    CHECK(manifest.strategies.size() == 5);
    CHECK(fs::exists(manifest.corpus));
    CHECK(fs::exists(manifest.catalog));
    CHECK(manifest.seed == 7);
    CHECK_THROWS_AS(manifest.profile_for("absent-model"), ValidationError);

    ManifestOverrides overrides;
    overrides.output_dir = fs::path("/tmp/elsewhere");
    PipelineContext ctx = PipelineContext::load(kManifest, overrides);
    CHECK(ctx.manifest.output_dir == fs::path("/tmp/elsewhere"));
    CHECK(ctx.corpus.stats().function_count == 24);
}

TEST_CASE("validate subcommand reports corpus shape and exits 0") {
    std::ostringstream out, err;
    CHECK(cmd_validate(kManifest, out, err) == 0);
    CHECK(out.str().find("24 functions") != std::string::npos);
    CHECK(out.str().find("validation OK") != std::string::npos);
    CHECK(err.str().empty());
}

TEST_CASE("missing manifest is a validation failure (exit 2)") {
    std::ostringstream out, err;
    CHECK(cmd_validate("/nonexistent/manifest.json", out, err) == 2);
    CHECK_FALSE(err.str().empty());
}

TEST_CASE("assess, score, eval and report run end to end in replay mode") {
    fs::path dir = fresh_dir("tb_pipeline_e2e");
    ManifestOverrides overrides;
    overrides.output_dir = dir;

    std::ostringstream out, err;
    REQUIRE(cmd_assess(kManifest, "baseline", "demo-model", true, std::nullopt, out, err,
                       overrides) == 0);
    REQUIRE(cmd_assess(kManifest, "score-est", "demo-model", true, std::nullopt, out, err,
                       overrides) == 0);
    CHECK(out.str().find("INCOMPLETE") == std::string::npos);

    fs::path run_path = dir / "runs" / "demo-model" / "baseline" / "run.jsonl";
    REQUIRE(fs::exists(run_path));
    AssessmentRun run = load_run(run_path);
    CHECK(run.verdicts.size() == 24 * 16);
    CHECK_FALSE(run.incomplete);

    REQUIRE(cmd_score(kManifest, std::nullopt, out, err, overrides) == 0);
    REQUIRE(cmd_score(kManifest, run_path, out, err, overrides) == 0);
    std::string reference = slurp(dir / "scores" / "reference.csv");
    CHECK(reference.find("auth.login.VxA,0.019801980198,16") != std::string::npos);
    CHECK(reference.find("auth.login.Vx0,1.000000000000,14") != std::string::npos);
    // Clean replay verdicts equal ground truth, so the aggregated scores match.
    CHECK(slurp(dir / "scores" / "demo-model_baseline.csv") == reference);

    REQUIRE(cmd_eval(kManifest, {}, out, err, overrides) == 0);
    for (const char* name : {"metrics.csv", "heatmap.csv", "heatmap.svg", "mae.csv",
                             "boxplot.csv", "boxplot.svg", "separation.txt"}) {
        CHECK(fs::exists(dir / "eval" / name));
    }
    std::string mae_out = slurp(dir / "eval" / "mae.csv");
    CHECK(mae_out.find("demo-model/score-est,0.475158,yes") != std::string::npos);
    std::string separation = slurp(dir / "eval" / "separation.txt");
    CHECK(separation.find("IQR overlap: no") != std::string::npos);

    REQUIRE(cmd_report(kManifest, {}, out, err, overrides) == 0);
    std::string report = slurp(dir / "report.md");
    CHECK(report.find("| demo-model | baseline | 1.0000 |") != std::string::npos);
}

TEST_CASE("replay pipeline output is byte-identical across repeated runs") {
    auto produce = [&](const std::string& name) {
        fs::path dir = fresh_dir(name);
        ManifestOverrides overrides;
        overrides.output_dir = dir;
        std::ostringstream out, err;
        for (const std::string strategy : {"baseline", "score-est"}) {
            REQUIRE(cmd_assess(kManifest, strategy, "demo-model", true, std::nullopt, out, err,
                               overrides) == 0);
        }
        REQUIRE(cmd_score(kManifest, std::nullopt, out, err, overrides) == 0);
        REQUIRE(cmd_eval(kManifest, {}, out, err, overrides) == 0);
        return dir;
    };
    fs::path first = produce("tb_pipeline_det1");
    fs::path second = produce("tb_pipeline_det2");

    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(first)) {
        if (!entry.is_regular_file()) continue;
        fs::path relative = fs::relative(entry.path(), first);
        CHECK(slurp(entry.path()) == slurp(second / relative));
        ++compared;
    }
    CHECK(compared >= 5);
}

TEST_CASE("discover_runs finds run files in sorted order") {
    fs::path dir = fresh_dir("tb_pipeline_discover");
    RunManifest manifest = load_run_manifest(kManifest);
    manifest.output_dir = dir;
    CHECK(discover_runs(manifest).empty());
    for (const std::string strategy : {"rules", "baseline"}) {
        fs::create_directories(dir / "runs" / "m" / strategy);
        std::ofstream(dir / "runs" / "m" / strategy / "run.jsonl") << "{}";
    }
    auto runs = discover_runs(manifest);
    REQUIRE(runs.size() == 2);
    CHECK(runs[0] < runs[1]);
}
