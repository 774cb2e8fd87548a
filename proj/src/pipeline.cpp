#include "trustbench/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trustbench/errors.hpp"
#include "trustbench/svg.hpp"

namespace trustbench {

using nlohmann::json;
namespace fs = std::filesystem;

const char* kToolVersion = "1.0.0";

const ModelProfile& RunManifest::profile_for(const std::string& model_id) const {
    for (const auto& profile : models) {
        if (profile.model_id == model_id) return profile;
    }
    throw ValidationError("manifest defines no model '" + model_id + "'");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& relative) {
    fs::path p(relative);
    return p.is_absolute() ? p : base / p;
}

ModelProfile profile_from_json(const json& doc) {
    ModelProfile profile;
    profile.model_id = doc.at("model_id").get<std::string>();
    auto kind = parse_provider_token(doc.value("provider", "replay"));
    if (!kind) {
        throw ParseError("model '" + profile.model_id + "': unknown provider '" +
                         doc.value("provider", "") + "'");
    }
    profile.provider_kind = *kind;
    profile.temperature = doc.value("temperature", 0.2);
    profile.max_output_tokens = doc.value("max_output_tokens", 1024L);
    profile.token_budget = doc.value("token_budget", 128000L);
    profile.endpoint_url = doc.value("endpoint_url", "");
    profile.credential_env_var = doc.value("credential_env_var", "");
    profile.validate();
    return profile;
}

std::string file_header(const RunManifest& manifest, const std::string& template_version) {
    std::ostringstream out;
    out << "# trustbench " << kToolVersion << " | templates " << template_version << " | seed "
        << manifest.seed << '\n';
    return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
}

int classify_exit(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e)) {
        return 2;
    }
    return 1;
}

}  // namespace

RunManifest load_run_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open run manifest: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("malformed run manifest " + path.string() + ": " + e.what());
    }

    RunManifest manifest;
    manifest.manifest_path = path;
    const fs::path base = path.parent_path();
    try {
        manifest.corpus = resolve(base, doc.at("corpus").get<std::string>());
        manifest.catalog = resolve(base, doc.at("catalog").get<std::string>());
        manifest.templates_dir = resolve(base, doc.at("templates").get<std::string>());
        manifest.ground_truth = resolve(base, doc.at("ground_truth").get<std::string>());
        manifest.cache = resolve(base, doc.at("cache").get<std::string>());
        if (doc.contains("call_graph")) {
            manifest.call_graph = resolve(base, doc.at("call_graph").get<std::string>());
        }
        if (doc.contains("qm_config")) {
            manifest.qm_config = resolve(base, doc.at("qm_config").get<std::string>());
        }
        if (doc.contains("cve_counts")) {
            manifest.cve_counts = resolve(base, doc.at("cve_counts").get<std::string>());
        }
        for (const auto& model : doc.at("models")) {
            manifest.models.push_back(profile_from_json(model));
        }
        for (const auto& token : doc.at("strategies")) {
            auto strategy = parse_strategy_token(token.get<std::string>());
            if (!strategy) {
                throw ParseError("unknown strategy '" + token.get<std::string>() + "'");
            }
            manifest.strategies.push_back(*strategy);
        }
        manifest.output_dir = resolve(base, doc.at("output_dir").get<std::string>());
        manifest.seed = doc.value("seed", 0UL);
        manifest.parallelism = doc.value("parallelism", 4);
        manifest.context_depth = doc.value("context_depth", 1);
    } catch (const json::exception& e) {
        throw ParseError("run manifest " + path.string() + ": " + e.what());
    }
    if (manifest.models.empty()) throw ValidationError("run manifest lists no models");
    if (manifest.strategies.empty()) throw ValidationError("run manifest lists no strategies");
    if (manifest.parallelism < 1) throw ValidationError("parallelism must be >= 1");

    // All referenced input paths must exist at invocation.
    for (const fs::path& p :
         {manifest.corpus, manifest.catalog, manifest.templates_dir, manifest.ground_truth}) {
        if (!fs::exists(p)) throw ValidationError("referenced path does not exist: " + p.string());
    }
    if (manifest.call_graph && !fs::exists(*manifest.call_graph)) {
        throw ValidationError("referenced path does not exist: " + manifest.call_graph->string());
    }
    if (manifest.qm_config && !fs::exists(*manifest.qm_config)) {
        throw ValidationError("referenced path does not exist: " + manifest.qm_config->string());
    }
    return manifest;
}

PipelineContext PipelineContext::load(const fs::path& manifest_path,
                                      const ManifestOverrides& overrides) {
    RunManifest manifest = load_run_manifest(manifest_path);
    if (overrides.qm_config) {
        if (!fs::exists(*overrides.qm_config)) {
            throw ValidationError("referenced path does not exist: " +
                                  overrides.qm_config->string());
        }
        manifest.qm_config = *overrides.qm_config;
    }
    if (overrides.output_dir) manifest.output_dir = *overrides.output_dir;
    Corpus corpus = load_corpus(manifest.corpus);
    Catalog catalog = load_catalog(manifest.catalog);
    GroundTruthMatrix truth = load_ground_truth(manifest.ground_truth, corpus);
    PromptRenderer renderer(TemplateSet::load(manifest.templates_dir), manifest.context_depth);
    CallGraph graph = manifest.call_graph ? import_call_graph(*manifest.call_graph, corpus)
                                          : build_call_graph(corpus);
    QualityModelConfig qm = manifest.qm_config ? load_qm_config(*manifest.qm_config, catalog)
                                               : default_qm_config(catalog);
    if (manifest.cve_counts) {
        qm.weights = derive_weights(load_cve_counts(*manifest.cve_counts));
    }
    return PipelineContext{std::move(manifest), std::move(corpus),    std::move(catalog),
                           std::move(truth),    std::move(renderer),  std::move(graph),
                           std::move(qm)};
}

int cmd_validate(const fs::path& manifest_path, std::ostream& out, std::ostream& err,
                 const ManifestOverrides& overrides) {
    try {
        PipelineContext ctx = PipelineContext::load(manifest_path, overrides);
        // Cache must at least be loadable (missing file == empty cache).
        ResponseCache cache(ctx.manifest.cache);
        ctx.qm.weights.validate();
        auto flags = ctx.qm.validate();

        CorpusStats stats = ctx.corpus.stats();
        VariantPairing pairing = variant_pairs(ctx.corpus);
        out << "corpus: " << stats.function_count << " functions, " << stats.service_count
            << " services, " << stats.operation_count << " operations\n";
        out << "variants: " << stats.secure_count << " Vx0, " << stats.vulnerable_count
            << " VxA, " << stats.single_vuln_count << " VxLine\n";
        out << "pairs: " << pairing.pairs.size() << " (omitted services: "
            << pairing.omitted_services << ")\n";
        out << "ground truth: " << ctx.truth.entries.size() << " entries\n";
        out << "cache: " << cache.size() << " entries\n";
        for (const auto& warning : ctx.corpus.warnings()) out << "warning: " << warning << '\n';
        for (const auto& warning : ctx.graph.warnings) out << "warning: " << warning << '\n';
        for (const auto& flag : flags) out << "flag: " << flag << '\n';
        out << "validation OK\n";
        return 0;
    } catch (const std::exception& e) {
        return classify_exit(e, err);
    }
}

namespace {

fs::path run_file_path(const RunManifest& manifest, const std::string& model_id,
                       const std::string& strategy) {
    return manifest.output_dir / "runs" / model_id / strategy / "run.jsonl";
}

}  // namespace

int cmd_assess(const fs::path& manifest_path, const std::string& strategy_name,
               const std::string& model_id, bool force_replay, std::optional<int> parallelism,
               std::ostream& out, std::ostream& err, const ManifestOverrides& overrides) {
    try {
        PipelineContext ctx = PipelineContext::load(manifest_path, overrides);
        auto strategy = parse_strategy_token(strategy_name);
        if (!strategy) throw ValidationError("unknown strategy '" + strategy_name + "'");
        ModelProfile profile = ctx.manifest.profile_for(model_id);
        if (force_replay) {
            profile.provider_kind = ProviderKind::Replay;
            profile.endpoint_url.clear();
            profile.credential_env_var.clear();
        }
        ResponseCache cache(ctx.manifest.cache);

        std::map<std::string, std::map<int, AdherenceLabel>> prior;
        const std::map<std::string, std::map<int, AdherenceLabel>>* prior_ptr = nullptr;
        if (*strategy == PromptStrategy::ScoreEstimation) {
            // Verdict tables come from the ground truth labels.
            for (const auto& rec : ctx.corpus.functions()) {
                prior[rec.function_id] = ctx.truth.labels_for(rec.function_id);
            }
            prior_ptr = &prior;
        }

        AssessmentRun run =
            run_sweep(ctx.corpus, ctx.catalog, *strategy, profile,
                      parallelism.value_or(ctx.manifest.parallelism), ctx.renderer, ctx.graph,
                      cache, prior_ptr);
        fs::path path = run_file_path(ctx.manifest, model_id, strategy_name);
        save_run(run, path);

        std::map<std::string, long> counts;
        for (const auto& verdict : run.verdicts) {
            if (verdict.parse_status == ParseStatus::Failed) {
                ++counts["failed"];
            } else if (verdict.label) {
                ++counts[label_name(*verdict.label)];
            } else if (verdict.score) {
                ++counts["scored"];
            }
        }
        out << "run written: " << path.string() << '\n';
        out << "verdicts: " << run.verdicts.size();
        for (const auto& [name, count] : counts) out << " | " << name << "=" << count;
        out << '\n';
        if (run.incomplete) {
            out << "run INCOMPLETE: " << run.errors.size() << " item errors\n";
            for (const auto& e : run.errors) {
                out << "  item error: " << e.function_id;
                if (e.practice_id) out << " p" << *e.practice_id;
                out << ": " << e.message << '\n';
            }
        }
        return 0;
    } catch (const std::exception& e) {
        return classify_exit(e, err);
    }
}

int cmd_score(const fs::path& manifest_path, const std::optional<fs::path>& run_file,
              std::ostream& out, std::ostream& err, const ManifestOverrides& overrides) {
    try {
        PipelineContext ctx = PipelineContext::load(manifest_path, overrides);
        std::map<std::string, TrustScore> scores;
        fs::path out_path;
        if (run_file) {
            AssessmentRun run = load_run(*run_file);
            scores = score_run(run, ctx.qm);
            out_path = ctx.manifest.output_dir / "scores" /
                       (run.model_id + "_" + run.strategy + ".csv");
        } else {
            scores = reference_scores(ctx.truth, ctx.qm);
            out_path = ctx.manifest.output_dir / "scores" / "reference.csv";
        }
        std::size_t undefined = 0;
        for (const auto& [id, score] : scores) {
            (void)id;
            if (!score.defined()) ++undefined;
        }
        write_file(out_path, file_header(ctx.manifest, ctx.renderer.templates().version()) +
                                 scores_to_csv(scores));
        out << "scores written: " << out_path.string() << " (" << scores.size()
            << " functions, " << undefined << " undefined)\n";
        return 0;
    } catch (const std::exception& e) {
        return classify_exit(e, err);
    }
}

std::vector<fs::path> discover_runs(const RunManifest& manifest) {
    std::vector<fs::path> runs;
    fs::path root = manifest.output_dir / "runs";
    if (!fs::exists(root)) return runs;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "run.jsonl") {
            runs.push_back(entry.path());
        }
    }
    std::sort(runs.begin(), runs.end());
    return runs;
}

namespace {

struct EvalOutput {
    std::vector<MetricsRow> metrics_rows;
    std::map<std::string, std::map<int, MacroMetrics>> heatmap;  // "model/strategy" rows
    std::vector<std::pair<std::string, std::pair<double, bool>>> mae_rows;
    std::vector<GroupStats> box_groups;
    std::vector<std::string> separation_lines;
};

EvalOutput evaluate_runs(const PipelineContext& ctx, const std::vector<fs::path>& run_files) {
    EvalOutput eval;
    auto reference = reference_scores(ctx.truth, ctx.qm);
    std::map<std::string, double> reference_values;
    for (const auto& [id, score] : reference) {
        if (score.defined()) reference_values[id] = *score.value;
    }
    VariantPairing pairing = variant_pairs(ctx.corpus);

    for (const auto& path : run_files) {
        AssessmentRun run = load_run(path);
        const std::string cell = run.model_id + "/" + run.strategy;

        if (run.strategy == strategy_token(PromptStrategy::ScoreEstimation)) {
            // Direct estimation: MAE against the reference scores.
            std::map<std::string, double> estimated;
            for (const auto& verdict : run.verdicts) {
                if (verdict.score) estimated[verdict.function_id] = *verdict.score;
            }
            double error = mae(estimated, reference_values);
            eval.mae_rows.push_back({cell, {error, mae_in_expected_band(error)}});
            continue;
        }

        ConfusionMatrix3 cm = confusion(run, ctx.truth);
        MacroMetrics metrics = macro_metrics(cm);
        eval.metrics_rows.push_back({run.model_id, run.strategy, metrics, cm.excluded});
        eval.heatmap[cell] = per_practice_metrics(run, ctx.truth);

        auto scores = score_run(run, ctx.qm);
        std::map<std::string, double> model_values;
        for (const auto& [id, score] : scores) {
            if (score.defined()) model_values[id] = *score.value;
        }
        double aggregated_error = mae(model_values, reference_values);
        eval.mae_rows.push_back({cell + " (aggregated)", {aggregated_error, false}});

        SeparationReport sep = separation_report(scores, pairing.pairs);
        GroupStats secure = sep.secure;
        GroupStats vulnerable = sep.vulnerable;
        secure.name = cell + "/secure";
        vulnerable.name = cell + "/vulnerable";
        eval.box_groups.push_back(secure);
        eval.box_groups.push_back(vulnerable);
        std::ostringstream line;
        char p_buf[32];
        std::snprintf(p_buf, sizeof(p_buf), "%.6g", sep.test.p_value);
        line << cell << ": U=" << sep.test.u_statistic << " p=" << p_buf << " ("
             << (sep.test.method == MannWhitneyMethod::Exact ? "exact" : "normal-approx")
             << "), IQR overlap: " << (sep.iqr_overlap ? "yes" : "no")
             << ", excluded pairs: " << sep.excluded_pairs;
        eval.separation_lines.push_back(line.str());
    }
    return eval;
}

std::string mae_csv(const EvalOutput& eval) {
    std::ostringstream out;
    out << "run,mae,in_expected_band\n";
    char buf[32];
    for (const auto& [name, row] : eval.mae_rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", row.first);
        out << name << ',' << buf << ',' << (row.second ? "yes" : "no") << '\n';
    }
    return out.str();
}

}  // namespace

int cmd_eval(const fs::path& manifest_path, std::vector<fs::path> run_files, std::ostream& out,
             std::ostream& err, const ManifestOverrides& overrides) {
    try {
        PipelineContext ctx = PipelineContext::load(manifest_path, overrides);
        if (run_files.empty()) run_files = discover_runs(ctx.manifest);
        if (run_files.empty()) throw ValidationError("no run files to evaluate");
        std::sort(run_files.begin(), run_files.end());

        EvalOutput eval = evaluate_runs(ctx, run_files);
        const std::string header = file_header(ctx.manifest, ctx.renderer.templates().version());
        const std::string svg_header = "<!-- trustbench " + std::string(kToolVersion) +
                                       " | templates " + ctx.renderer.templates().version() +
                                       " | seed " + std::to_string(ctx.manifest.seed) + " -->\n";
        fs::path dir = ctx.manifest.output_dir / "eval";
        write_file(dir / "metrics.csv", header + metrics_to_csv(eval.metrics_rows));
        write_file(dir / "heatmap.csv", header + heatmap_to_csv(eval.heatmap));
        write_file(dir / "heatmap.svg",
                   svg_header + render_heatmap_svg(eval.heatmap, "Macro F1 per practice"));
        write_file(dir / "mae.csv", header + mae_csv(eval));
        write_file(dir / "boxplot.csv", header + boxplot_to_csv(eval.box_groups));
        write_file(dir / "boxplot.svg",
                   svg_header + render_boxplot_svg(eval.box_groups,
                                                   "Trustworthiness score distributions"));
        {
            std::ostringstream sep;
            sep << header;
            for (const auto& line : eval.separation_lines) sep << line << '\n';
            write_file(dir / "separation.txt", sep.str());
        }
        out << "eval written to " << dir.string() << " (" << run_files.size() << " runs)\n";
        for (const auto& line : eval.separation_lines) out << line << '\n';
        return 0;
    } catch (const std::exception& e) {
        return classify_exit(e, err);
    }
}

int cmd_report(const fs::path& manifest_path, std::vector<fs::path> run_files, std::ostream& out,
               std::ostream& err, const ManifestOverrides& overrides) {
    try {
        PipelineContext ctx = PipelineContext::load(manifest_path, overrides);
        if (run_files.empty()) run_files = discover_runs(ctx.manifest);
        if (run_files.empty()) throw ValidationError("no run files to report on");
        std::sort(run_files.begin(), run_files.end());
        EvalOutput eval = evaluate_runs(ctx, run_files);

        std::ostringstream md;
        md << "# Assessment report\n\n";
        md << "tool " << kToolVersion << ", templates " << ctx.renderer.templates().version()
           << ", seed " << ctx.manifest.seed << "\n\n";
        md << "## Classification metrics\n\n";
        md << "| model | strategy | macro acc | balanced acc | macro prec | macro rec | macro F1 "
              "| excluded |\n";
        md << "|---|---|---|---|---|---|---|---|\n";
        char buf[32];
        auto f = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.4f", v);
            return std::string(buf);
        };
        for (const auto& row : eval.metrics_rows) {
            md << "| " << row.model << " | " << row.strategy << " | " << f(row.metrics.accuracy)
               << " | " << f(row.metrics.balanced_accuracy) << " | " << f(row.metrics.precision)
               << " | " << f(row.metrics.recall) << " | " << f(row.metrics.f1) << " | "
               << row.excluded << " |\n";
        }
        md << "\n## Score comparison (MAE vs reference)\n\n";
        md << "| run | MAE | direct-estimation band 0.40-0.60 |\n|---|---|---|\n";
        for (const auto& [name, row] : eval.mae_rows) {
            md << "| " << name << " | " << f(row.first) << " | "
               << (row.second ? "in-band" : "-") << " |\n";
        }
        md << "\n## Secure vs vulnerable separation\n\n";
        for (const auto& line : eval.separation_lines) md << "- " << line << "\n";

        fs::path path = ctx.manifest.output_dir / "report.md";
        write_file(path, md.str());
        out << "report written: " << path.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        return classify_exit(e, err);
    }
}

}  // namespace trustbench
