#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trustbench/adherence.hpp"
#include "trustbench/corpus.hpp"
#include "trustbench/practices.hpp"

namespace trustbench {

enum class PromptStrategy {
    Baseline,          // practice description + function, Yes/No schema
    CweAndBadExamples, // baseline + CWE mapping + violation snippets
    CallContext,       // baseline + source of called functions
    RuleBased,         // baseline structure with Followed/NotFollowed instructions
    ScoreEstimation,   // function-level scalar score request
};

std::string strategy_token(PromptStrategy strategy);
std::optional<PromptStrategy> parse_strategy_token(const std::string& token);

struct RenderedPrompt {
    PromptStrategy strategy = PromptStrategy::Baseline;
    std::string function_id;
    std::optional<int> practice_id;  // absent for ScoreEstimation
    std::string text;
    std::vector<std::string> context_function_ids;  // CallContext only
    std::string content_hash;                       // sha256 of text
};

struct CallGraph {
    // function_id -> callee ids, deterministic order (first call site).
    std::map<std::string, std::vector<std::string>> edges;
    std::set<std::string> external_ids;  // endpoints not present in the corpus
    std::vector<std::string> warnings;
};

struct ResolvedCalls {
    std::vector<std::string> callees;           // corpus function_ids, source order
    std::vector<std::string> unresolved_names;  // called names with no corpus match
};

// Source fencing: prompts embed code between fixed sentinel lines; sentinel
// occurrences inside the code are escaped by doubling.
extern const std::string kFenceSentinel;
std::string escape_fenced(const std::string& text);
std::string unescape_fenced(const std::string& text);

// Prompt wording lives in versioned template files; the version string is
// embedded in every rendered prompt.
class TemplateSet {
public:
    static TemplateSet load(const std::filesystem::path& dir);

    const std::string& version() const { return version_; }
    const std::string& text(const std::string& name) const;

private:
    std::string version_;
    std::map<std::string, std::string> templates_;
};

class PromptRenderer {
public:
    PromptRenderer(TemplateSet templates, int context_depth = 1)
        : templates_(std::move(templates)), context_depth_(context_depth) {}

    const TemplateSet& templates() const { return templates_; }
    int context_depth() const { return context_depth_; }

    RenderedPrompt render_baseline(const FunctionRecord& function, const Practice& practice) const;
    RenderedPrompt render_cwe_examples(const FunctionRecord& function,
                                       const Practice& practice) const;
    RenderedPrompt render_call_context(const FunctionRecord& function, const Practice& practice,
                                       const CallGraph& graph, const Corpus& corpus) const;
    RenderedPrompt render_rule_based(const FunctionRecord& function,
                                     const Practice& practice) const;
    RenderedPrompt render_score_estimation(
        const FunctionRecord& function,
        const std::map<int, AdherenceLabel>& prior_verdicts) const;

    RenderedPrompt render(PromptStrategy strategy, const FunctionRecord& function,
                          const Practice& practice, const CallGraph& graph,
                          const Corpus& corpus) const;

    // The CWE/bad-example block for a practice; constant across functions.
    std::string cwe_block(const Practice& practice) const;

private:
    RenderedPrompt finish(RenderedPrompt prompt) const;

    TemplateSet templates_;
    int context_depth_;
};

// Lexical Java call-site scan: strips comments and string/char literals, then
// matches identifiers directly preceding '(' against corpus operation names.
ResolvedCalls resolve_calls(const FunctionRecord& function, const Corpus& corpus);

// Graph over the whole corpus: declared_callees when present, the lexical
// resolver otherwise.
CallGraph build_call_graph(const Corpus& corpus);

// JSON map function_id -> [callee ids]; ids absent from the corpus are loaded
// with an external flag and a warning.
CallGraph import_call_graph(const std::filesystem::path& path, const Corpus& corpus);

// ceil(bytes / 4); the budget check used before dispatch.
long estimate_tokens(const std::string& text);
void check_token_budget(const RenderedPrompt& prompt, long token_budget);

}  // namespace trustbench
