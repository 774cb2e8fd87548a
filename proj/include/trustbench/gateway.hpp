#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "trustbench/adherence.hpp"
#include "trustbench/corpus.hpp"
#include "trustbench/practices.hpp"
#include "trustbench/prompting.hpp"

namespace trustbench {

enum class ProviderKind {
    OpenAiCompatible,
    GeminiCompatible,
    Replay,  // cache-only, offline
};

std::string provider_token(ProviderKind kind);
std::optional<ProviderKind> parse_provider_token(const std::string& token);

struct ModelProfile {
    std::string model_id;
    ProviderKind provider_kind = ProviderKind::Replay;
    double temperature = 0.2;
    long max_output_tokens = 1024;
    long token_budget = 128000;
    std::string endpoint_url;
    std::string credential_env_var;  // unused for Replay

    void validate() const;
};

struct CacheEntry {
    std::string key;  // sha256 of (model_id, template_version, prompt hash)
    std::string request_text;
    std::string response_text;
    std::string timestamp;
    std::string provider_metadata;
};

std::string cache_key(const std::string& model_id, const std::string& template_version,
                      const std::string& prompt_content_hash);

// Append-only JSONL cache with an in-memory index. Concurrent reads are free;
// appends are serialized.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path path);

    std::optional<CacheEntry> lookup(const std::string& key) const;
    void append(const CacheEntry& entry);
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, CacheEntry> index_;
};

enum class ParseStatus { Clean, Repaired, Failed };

std::string parse_status_token(ParseStatus status);
std::optional<ParseStatus> parse_parse_status_token(const std::string& token);

struct ModelVerdict {
    std::string function_id;
    std::optional<int> practice_id;       // absent for score prompts
    std::optional<AdherenceLabel> label;  // classification prompts
    std::optional<double> score;          // score prompts, in [0,1]
    std::string raw_response;
    ParseStatus parse_status = ParseStatus::Clean;
};

struct ClassificationParse {
    std::optional<AdherenceLabel> label;  // empty iff status == Failed
    ParseStatus status = ParseStatus::Clean;
};

// Total over arbitrary input: returns a label or Failed, never throws.
// Repair rules fire in fixed order; status records whether any were needed.
ClassificationParse parse_classification(const std::string& raw);

struct ScoreParse {
    double value = 0.0;  // in [0,1]
    ParseStatus status = ParseStatus::Clean;
};

// Extracts the SCORE answer line (fallback: last bare number). Out-of-range
// values and missing numbers are errors, not clamps.
ScoreParse parse_score(const std::string& raw);

struct RunItemError {
    std::string function_id;
    std::optional<int> practice_id;
    std::string message;
};

struct AssessmentRun {
    std::string model_id;
    std::string strategy;  // strategy token
    std::string template_version;
    bool incomplete = false;
    std::vector<ModelVerdict> verdicts;  // canonical (function_id, practice_id) order
    std::vector<RunItemError> errors;
};

std::string run_to_jsonl(const AssessmentRun& run);
AssessmentRun run_from_jsonl(const std::string& text);
AssessmentRun load_run(const std::filesystem::path& path);
void save_run(const AssessmentRun& run, const std::filesystem::path& path);

class Gateway {
public:
    Gateway(ModelProfile profile, ResponseCache& cache, std::string template_version);

    // Cache hit: returns the stored response with no network I/O. Miss:
    // Replay profiles fail with ReplayMissError, network profiles perform the
    // HTTP call (3 attempts, exponential backoff from 1s) then append the
    // cache entry.
    std::string dispatch(const RenderedPrompt& prompt);

    const ModelProfile& profile() const { return profile_; }

private:
    std::string http_complete(const std::string& prompt_text, std::string& metadata_out);

    ModelProfile profile_;
    ResponseCache& cache_;
    std::string template_version_;
};

// Classification sweep over every (function, practice) pair, or every function
// for ScoreEstimation (prior_verdicts supplies the per-function verdict table,
// keyed by function_id). Per-item failures are collected and the run is marked
// incomplete; output order is canonical regardless of parallelism.
AssessmentRun run_sweep(
    const Corpus& corpus, const Catalog& catalog, PromptStrategy strategy,
    const ModelProfile& profile, int parallelism, const PromptRenderer& renderer,
    const CallGraph& graph, ResponseCache& cache,
    const std::map<std::string, std::map<int, AdherenceLabel>>* prior_verdicts = nullptr);

}  // namespace trustbench
