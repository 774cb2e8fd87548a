// Builds a replay cache for a manifest by rendering every prompt the sweep
// would dispatch and synthesizing schema-clean responses from ground truth.
// Useful for refreshing committed fixtures after template changes.
#include <algorithm>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trustbench/pipeline.hpp"

using namespace trustbench;

namespace {

std::string response_for(AdherenceLabel label) {
    switch (label) {
        case AdherenceLabel::Followed: return "Applicability: Yes\nAdherence: Yes\n";
        case AdherenceLabel::NotFollowed: return "Applicability: Yes\nAdherence: No\n";
        case AdherenceLabel::NotApplicable: return "Applicability: No\n";
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthesize a replay cache from ground truth"};
    std::string manifest_path;
    app.add_option("--manifest", manifest_path, "Run manifest file")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        PipelineContext ctx = PipelineContext::load(manifest_path);
        ResponseCache cache(ctx.manifest.cache);

        std::vector<const FunctionRecord*> functions;
        for (const auto& rec : ctx.corpus.functions()) functions.push_back(&rec);
        std::sort(functions.begin(), functions.end(),
                  [](const FunctionRecord* a, const FunctionRecord* b) {
                      return a->function_id < b->function_id;
                  });

        const std::string& version = ctx.renderer.templates().version();
        std::size_t written = 0;
        for (const auto& profile : ctx.manifest.models) {
            for (PromptStrategy strategy : ctx.manifest.strategies) {
                for (const FunctionRecord* rec : functions) {
                    std::vector<RenderedPrompt> prompts;
                    std::vector<std::string> responses;
                    if (strategy == PromptStrategy::ScoreEstimation) {
                        auto table = ctx.truth.labels_for(rec->function_id);
                        prompts.push_back(ctx.renderer.render_score_estimation(*rec, table));
                        responses.push_back("SCORE: 0.5\n");
                    } else {
                        for (int p = 1; p <= kPracticeCount; ++p) {
                            prompts.push_back(ctx.renderer.render(strategy, *rec,
                                                                  ctx.catalog.at(p), ctx.graph,
                                                                  ctx.corpus));
                            responses.push_back(
                                response_for(ctx.truth.at(rec->function_id, p)));
                        }
                    }
                    for (std::size_t i = 0; i < prompts.size(); ++i) {
                        CacheEntry entry;
                        entry.key = cache_key(profile.model_id, version,
                                              prompts[i].content_hash);
                        entry.request_text = prompts[i].text;
                        entry.response_text = responses[i];
                        entry.timestamp = "1970-01-01T00:00:00Z";
                        entry.provider_metadata = "synthetic";
                        cache.append(entry);
                        ++written;
                    }
                }
            }
        }
        std::cout << "cache now holds " << cache.size() << " entries (" << written
                  << " prompts visited)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
