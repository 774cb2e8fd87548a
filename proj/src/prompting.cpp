#include "trustbench/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trustbench/errors.hpp"
#include "trustbench/sha256.hpp"

namespace trustbench {

const std::string kFenceSentinel = "----8<----CODE-FENCE----";

std::string strategy_token(PromptStrategy strategy) {
    switch (strategy) {
        case PromptStrategy::Baseline: return "baseline";
        case PromptStrategy::CweAndBadExamples: return "cwe";
        case PromptStrategy::CallContext: return "callctx";
        case PromptStrategy::RuleBased: return "rules";
        case PromptStrategy::ScoreEstimation: return "score-est";
    }
    return "?";
}

std::optional<PromptStrategy> parse_strategy_token(const std::string& token) {
    if (token == "baseline") return PromptStrategy::Baseline;
    if (token == "cwe") return PromptStrategy::CweAndBadExamples;
    if (token == "callctx") return PromptStrategy::CallContext;
    if (token == "rules") return PromptStrategy::RuleBased;
    if (token == "score-est") return PromptStrategy::ScoreEstimation;
    return std::nullopt;
}

namespace {

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open template file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string chomp(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

}  // namespace

std::string escape_fenced(const std::string& text) {
    return replace_all(text, kFenceSentinel, kFenceSentinel + kFenceSentinel);
}

std::string unescape_fenced(const std::string& text) {
    return replace_all(text, kFenceSentinel + kFenceSentinel, kFenceSentinel);
}

static std::string fence(const std::string& source) {
    std::string body = escape_fenced(source);
    if (!body.empty() && body.back() != '\n') body.push_back('\n');
    return kFenceSentinel + "\n" + body + kFenceSentinel;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet set;
    set.version_ = chomp(read_text_file(dir / "VERSION"));
    if (set.version_.empty()) throw ParseError("empty template VERSION file in " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".txt") {
            set.templates_[entry.path().stem().string()] = read_text_file(entry.path());
        }
    }
    for (const char* required : {"baseline", "cwe_block", "call_context_header",
                                 "call_context_entry", "call_context_empty", "rule_based",
                                 "score_estimation"}) {
        if (!set.templates_.contains(required)) {
            throw ParseError("template directory " + dir.string() + " missing " + required +
                             ".txt");
        }
    }
    return set;
}

const std::string& TemplateSet::text(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ValidationError("unknown template '" + name + "'");
    return it->second;
}

RenderedPrompt PromptRenderer::finish(RenderedPrompt prompt) const {
    prompt.content_hash = sha256_hex(prompt.text);
    return prompt;
}

RenderedPrompt PromptRenderer::render_baseline(const FunctionRecord& function,
                                               const Practice& practice) const {
    std::string text = templates_.text("baseline");
    text = replace_all(text, "{{TEMPLATE_VERSION}}", templates_.version());
    text = replace_all(text, "{{PRACTICE_ID}}", std::to_string(practice.practice_id));
    text = replace_all(text, "{{PRACTICE_TITLE}}", practice.title);
    text = replace_all(text, "{{PRACTICE_DESCRIPTION}}", practice.description);
    text = replace_all(text, "{{FUNCTION_ID}}", function.function_id);
    text = replace_all(text, "{{FUNCTION_SOURCE}}", fence(function.source_text));

    RenderedPrompt prompt;
    prompt.strategy = PromptStrategy::Baseline;
    prompt.function_id = function.function_id;
    prompt.practice_id = practice.practice_id;
    prompt.text = std::move(text);
    return finish(std::move(prompt));
}

std::string PromptRenderer::cwe_block(const Practice& practice) const {
    std::ostringstream cwes;
    for (std::size_t i = 0; i < practice.cwe_ids.size(); ++i) {
        if (i > 0) cwes << ", ";
        cwes << "CWE-" << practice.cwe_ids[i];
    }
    std::ostringstream examples;
    for (std::size_t i = 0; i < practice.bad_examples.size(); ++i) {
        if (i > 0) examples << '\n';
        examples << "Violation example " << (i + 1) << ":\n" << fence(practice.bad_examples[i]);
    }
    std::string block = templates_.text("cwe_block");
    block = replace_all(block, "{{CWE_LIST}}", cwes.str());
    block = replace_all(block, "{{BAD_EXAMPLES}}", examples.str());
    return block;
}

RenderedPrompt PromptRenderer::render_cwe_examples(const FunctionRecord& function,
                                                   const Practice& practice) const {
    if (practice.cwe_ids.empty()) {
        throw ValidationError("practice " + std::to_string(practice.practice_id) +
                              " has no CWE mapping");
    }
    if (practice.bad_examples.empty()) {
        throw ValidationError("practice " + std::to_string(practice.practice_id) +
                              " has no bad examples");
    }
    RenderedPrompt prompt = render_baseline(function, practice);
    prompt.strategy = PromptStrategy::CweAndBadExamples;
    prompt.text += "\n" + cwe_block(practice);
    return finish(std::move(prompt));
}

RenderedPrompt PromptRenderer::render_call_context(const FunctionRecord& function,
                                                   const Practice& practice,
                                                   const CallGraph& graph,
                                                   const Corpus& corpus) const {
    // Breadth-first to the configured depth; order is edge order, deduplicated.
    std::vector<std::string> context_ids;
    std::set<std::string> seen{function.function_id};
    std::vector<std::string> frontier{function.function_id};
    for (int depth = 0; depth < context_depth_; ++depth) {
        std::vector<std::string> next;
        for (const auto& id : frontier) {
            auto it = graph.edges.find(id);
            if (it == graph.edges.end()) continue;
            for (const auto& callee : it->second) {
                if (!seen.insert(callee).second) continue;
                if (corpus.contains(callee)) {
                    context_ids.push_back(callee);
                    next.push_back(callee);
                }
            }
        }
        frontier = std::move(next);
    }

    RenderedPrompt prompt = render_baseline(function, practice);
    prompt.strategy = PromptStrategy::CallContext;
    if (context_ids.empty()) {
        prompt.text += "\n" + chomp(templates_.text("call_context_empty"));
    } else {
        std::ostringstream section;
        section << '\n' << chomp(templates_.text("call_context_header"));
        for (const auto& id : context_ids) {
            std::string entry = templates_.text("call_context_entry");
            entry = replace_all(entry, "{{CALLEE_ID}}", id);
            entry = replace_all(entry, "{{CALLEE_SOURCE}}", fence(corpus.at(id).source_text));
            section << '\n' << chomp(entry);
        }
        prompt.text += section.str();
    }
    prompt.context_function_ids = std::move(context_ids);
    return finish(std::move(prompt));
}

RenderedPrompt PromptRenderer::render_rule_based(const FunctionRecord& function,
                                                 const Practice& practice) const {
    const auto& rules = practice.rule_instructions;
    if (rules.followed.empty() || rules.not_followed.empty()) {
        throw ValidationError("practice " + std::to_string(practice.practice_id) +
                              " has incomplete rule instructions");
    }
    std::string text = templates_.text("rule_based");
    text = replace_all(text, "{{TEMPLATE_VERSION}}", templates_.version());
    text = replace_all(text, "{{PRACTICE_ID}}", std::to_string(practice.practice_id));
    text = replace_all(text, "{{PRACTICE_TITLE}}", practice.title);
    text = replace_all(text, "{{RULE_FOLLOWED}}", chomp(rules.followed));
    text = replace_all(text, "{{RULE_NOT_FOLLOWED}}", chomp(rules.not_followed));
    text = replace_all(text, "{{FUNCTION_ID}}", function.function_id);
    text = replace_all(text, "{{FUNCTION_SOURCE}}", fence(function.source_text));

    RenderedPrompt prompt;
    prompt.strategy = PromptStrategy::RuleBased;
    prompt.function_id = function.function_id;
    prompt.practice_id = practice.practice_id;
    prompt.text = std::move(text);
    return finish(std::move(prompt));
}

RenderedPrompt PromptRenderer::render_score_estimation(
    const FunctionRecord& function, const std::map<int, AdherenceLabel>& prior_verdicts) const {
    for (int p = 1; p <= kPracticeCount; ++p) {
        if (!prior_verdicts.contains(p)) {
            throw ValidationError("verdict table incomplete: missing practice " +
                                  std::to_string(p));
        }
    }
    if (prior_verdicts.size() != static_cast<std::size_t>(kPracticeCount)) {
        throw ValidationError("verdict table has " + std::to_string(prior_verdicts.size()) +
                              " rows, expected 16");
    }
    std::ostringstream table;
    for (int p = 1; p <= kPracticeCount; ++p) {
        table << "Practice " << p << ": " << label_name(prior_verdicts.at(p)) << '\n';
    }
    std::string text = templates_.text("score_estimation");
    text = replace_all(text, "{{TEMPLATE_VERSION}}", templates_.version());
    text = replace_all(text, "{{FUNCTION_ID}}", function.function_id);
    text = replace_all(text, "{{FUNCTION_SOURCE}}", fence(function.source_text));
    text = replace_all(text, "{{VERDICT_TABLE}}", chomp(table.str()));

    RenderedPrompt prompt;
    prompt.strategy = PromptStrategy::ScoreEstimation;
    prompt.function_id = function.function_id;
    prompt.text = std::move(text);
    return finish(std::move(prompt));
}

RenderedPrompt PromptRenderer::render(PromptStrategy strategy, const FunctionRecord& function,
                                      const Practice& practice, const CallGraph& graph,
                                      const Corpus& corpus) const {
    switch (strategy) {
        case PromptStrategy::Baseline: return render_baseline(function, practice);
        case PromptStrategy::CweAndBadExamples: return render_cwe_examples(function, practice);
        case PromptStrategy::CallContext:
            return render_call_context(function, practice, graph, corpus);
        case PromptStrategy::RuleBased: return render_rule_based(function, practice);
        case PromptStrategy::ScoreEstimation:
            throw ValidationError("score estimation needs prior verdicts; use "
                                  "render_score_estimation");
    }
    throw ValidationError("unknown strategy");
}

// ---------------------------------------------------------------------------
// Lexical Java call resolver

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Replaces comments and string/char literals with spaces, preserving length.
std::string strip_comments_and_strings(const std::string& src) {
    std::string out = src;
    std::size_t i = 0;
    const std::size_t n = src.size();
    while (i < n) {
        char c = src[i];
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') out[i++] = ' ';
        } else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            out[i] = out[i + 1] = ' ';
            i += 2;
            while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) out[i++] = ' ';
            if (i + 1 < n) {
                out[i] = out[i + 1] = ' ';
                i += 2;
            }
        } else if (c == '"' || c == '\'') {
            char quote = c;
            out[i++] = ' ';
            while (i < n && src[i] != quote) {
                if (src[i] == '\\' && i + 1 < n) out[i++] = ' ';
                out[i++] = ' ';
            }
            if (i < n) out[i++] = ' ';
        } else {
            ++i;
        }
    }
    return out;
}

const std::set<std::string>& java_non_call_keywords() {
    static const std::set<std::string> keywords = {
        "if", "for", "while", "switch", "catch", "return", "synchronized", "do",
        "try", "else", "throw", "new", "assert", "instanceof", "this", "super"};
    return keywords;
}

}  // namespace

ResolvedCalls resolve_calls(const FunctionRecord& function, const Corpus& corpus) {
    // Name table: simple operation name -> candidate records.
    std::map<std::string, std::vector<const FunctionRecord*>> by_name;
    for (const auto& rec : corpus.functions()) {
        by_name[rec.operation_name].push_back(&rec);
    }

    const std::string text = strip_comments_and_strings(function.source_text);
    ResolvedCalls result;
    std::set<std::string> seen_callees;
    std::set<std::string> seen_unresolved;

    std::string prev_token;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (is_ident_start(c)) {
            std::size_t start = i;
            while (i < n && is_ident_char(text[i])) ++i;
            std::string ident = text.substr(start, i - start);
            std::size_t j = i;
            while (j < n && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            bool call_position = j < n && text[j] == '(';
            // A preceding identifier means a declaration (return type + name),
            // `new` means a constructor; neither is a call of `ident`. Keywords
            // like `return` do not block: `return foo(x)` is a call.
            bool prev_blocks =
                !prev_token.empty() &&
                ((is_ident_start(prev_token[0]) &&
                  !java_non_call_keywords().contains(prev_token)) ||
                 prev_token == "new");
            if (call_position && !prev_blocks && !java_non_call_keywords().contains(ident)) {
                auto it = by_name.find(ident);
                if (it != by_name.end()) {
                    // Prefer a callee in the same service and variant, then the
                    // same service, then the smallest function_id.
                    const FunctionRecord* best = nullptr;
                    auto rank = [&](const FunctionRecord* rec) {
                        if (rec->service_id == function.service_id &&
                            rec->variant == function.variant)
                            return 0;
                        if (rec->service_id == function.service_id) return 1;
                        return 2;
                    };
                    for (const FunctionRecord* rec : it->second) {
                        if (rec->function_id == function.function_id) continue;
                        if (!best || rank(rec) < rank(best) ||
                            (rank(rec) == rank(best) && rec->function_id < best->function_id)) {
                            best = rec;
                        }
                    }
                    if (best && seen_callees.insert(best->function_id).second) {
                        result.callees.push_back(best->function_id);
                    }
                } else if (seen_unresolved.insert(ident).second) {
                    result.unresolved_names.push_back(ident);
                }
            }
            prev_token = std::move(ident);
        } else {
            if (!std::isspace(static_cast<unsigned char>(c))) prev_token = std::string(1, c);
            ++i;
        }
    }
    return result;
}

CallGraph build_call_graph(const Corpus& corpus) {
    CallGraph graph;
    for (const auto& rec : corpus.functions()) {
        if (!rec.declared_callees.empty()) {
            graph.edges[rec.function_id] = rec.declared_callees;
            for (const auto& callee : rec.declared_callees) {
                if (!corpus.contains(callee)) {
                    graph.external_ids.insert(callee);
                    graph.warnings.push_back("declared callee '" + callee + "' of '" +
                                             rec.function_id + "' is external");
                }
            }
        } else {
            graph.edges[rec.function_id] = resolve_calls(rec, corpus).callees;
        }
    }
    return graph;
}

CallGraph import_call_graph(const std::filesystem::path& path, const Corpus& corpus) {
    nlohmann::ordered_json doc;
    try {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open call graph file: " + path.string());
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed call graph " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("call graph " + path.string() + ": expected a JSON object");
    }
    CallGraph graph;
    for (const auto& [caller, callees] : doc.items()) {
        if (!callees.is_array()) {
            throw ParseError("call graph " + path.string() + ": value for '" + caller +
                             "' is not an array");
        }
        std::vector<std::string> edge_list;
        for (const auto& callee : callees) {
            edge_list.push_back(callee.get<std::string>());
        }
        if (!corpus.contains(caller)) {
            graph.external_ids.insert(caller);
            graph.warnings.push_back("caller '" + caller + "' not in corpus (external)");
        }
        for (const auto& callee : edge_list) {
            if (!corpus.contains(callee)) {
                graph.external_ids.insert(callee);
                graph.warnings.push_back("callee '" + callee + "' not in corpus (external)");
            }
        }
        graph.edges[caller] = std::move(edge_list);
    }
    return graph;
}

long estimate_tokens(const std::string& text) {
    return static_cast<long>((text.size() + 3) / 4);
}

void check_token_budget(const RenderedPrompt& prompt, long token_budget) {
    long measured = estimate_tokens(prompt.text);
    if (measured > token_budget) throw BudgetExceededError(token_budget, measured);
}

}  // namespace trustbench
