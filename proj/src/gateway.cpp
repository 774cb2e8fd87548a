#include "trustbench/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "trustbench/errors.hpp"
#include "trustbench/sha256.hpp"

namespace trustbench {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string provider_token(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::OpenAiCompatible: return "openai";
        case ProviderKind::GeminiCompatible: return "gemini";
        case ProviderKind::Replay: return "replay";
    }
    return "?";
}

std::optional<ProviderKind> parse_provider_token(const std::string& token) {
    if (token == "openai") return ProviderKind::OpenAiCompatible;
    if (token == "gemini") return ProviderKind::GeminiCompatible;
    if (token == "replay") return ProviderKind::Replay;
    return std::nullopt;
}

void ModelProfile::validate() const {
    if (model_id.empty()) throw ValidationError("model profile: empty model_id");
    if (temperature < 0.0 || temperature > 2.0) {
        throw ValidationError("model profile '" + model_id + "': temperature outside [0,2]");
    }
    if (max_output_tokens <= 0) {
        throw ValidationError("model profile '" + model_id + "': max_output_tokens must be > 0");
    }
    if (token_budget <= 0) {
        throw ValidationError("model profile '" + model_id + "': token_budget must be > 0");
    }
    if (provider_kind != ProviderKind::Replay && endpoint_url.empty()) {
        throw ValidationError("model profile '" + model_id + "': endpoint_url required");
    }
}

std::string cache_key(const std::string& model_id, const std::string& template_version,
                      const std::string& prompt_content_hash) {
    return sha256_hex(model_id + "\n" + template_version + "\n" + prompt_content_hash);
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // fresh cache
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("cache " + path_.string() + ":" + std::to_string(lineno) + ": " +
                             e.what());
        }
        CacheEntry entry;
        entry.key = doc.at("key").get<std::string>();
        entry.request_text = doc.at("request_text").get<std::string>();
        entry.response_text = doc.at("response_text").get<std::string>();
        entry.timestamp = doc.value("timestamp", "");
        entry.provider_metadata = doc.value("provider_metadata", "");
        index_[entry.key] = std::move(entry);
    }
}

std::optional<CacheEntry> ResponseCache::lookup(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::append(const CacheEntry& entry) {
    std::lock_guard lock(mutex_);
    if (index_.contains(entry.key)) return;  // response_text is immutable once written
    ordered_json doc = {{"key", entry.key},
                        {"request_text", entry.request_text},
                        {"response_text", entry.response_text},
                        {"timestamp", entry.timestamp},
                        {"provider_metadata", entry.provider_metadata}};
    std::ofstream out(path_, std::ios::app);
    if (!out) throw ValidationError("cannot append to cache file " + path_.string());
    out << doc.dump() << '\n';
    index_[entry.key] = entry;
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return index_.size();
}

// ---------------------------------------------------------------------------
// Verdict parsing

std::string parse_status_token(ParseStatus status) {
    switch (status) {
        case ParseStatus::Clean: return "clean";
        case ParseStatus::Repaired: return "repaired";
        case ParseStatus::Failed: return "failed";
    }
    return "?";
}

std::optional<ParseStatus> parse_parse_status_token(const std::string& token) {
    if (token == "clean") return ParseStatus::Clean;
    if (token == "repaired") return ParseStatus::Repaired;
    if (token == "failed") return ParseStatus::Failed;
    return std::nullopt;
}

namespace {

std::string strip_markdown(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '*' || c == '_' || c == '`' || c == '#') continue;
        out.push_back(c);
    }
    return out;
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim_ws(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)); }

// First standalone yes/no at or after `from` in lowercase text.
std::optional<bool> find_standalone_yes_no(const std::string& lower, std::size_t from) {
    std::optional<bool> best;
    std::size_t best_pos = std::string::npos;
    for (const auto& [word, value] : {std::pair<std::string, bool>{"yes", true},
                                      std::pair<std::string, bool>{"no", false}}) {
        std::size_t pos = from;
        while ((pos = lower.find(word, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
            std::size_t after = pos + word.size();
            bool right_ok = after >= lower.size() || !is_word_char(lower[after]);
            if (left_ok && right_ok) {
                if (pos < best_pos) {
                    best_pos = pos;
                    best = value;
                }
                break;
            }
            ++pos;
        }
    }
    return best;
}

struct QuestionAnswer {
    std::optional<bool> value;  // yes = true
    bool repaired = false;
};

QuestionAnswer find_answer(const std::string& raw, const std::string& exact_prefix,
                           const std::string& keyword) {
    QuestionAnswer answer;
    const auto lines = split_lines(raw);

    // Rule 1: exact schema line.
    for (const auto& line : lines) {
        std::string t = trim_ws(line);
        if (t == exact_prefix + ": Yes") return {true, false};
        if (t == exact_prefix + ": No") return {false, false};
    }
    // Rule 2: case-insensitive keyword followed by yes/no in the same line,
    // markdown stripped.
    for (const auto& line : lines) {
        std::string lower = lowercase(strip_markdown(line));
        std::size_t pos = lower.find(keyword);
        if (pos == std::string::npos) continue;
        auto value = find_standalone_yes_no(lower, pos + keyword.size());
        if (value) return {value, true};
    }
    // Rule 3: first standalone yes/no anywhere after the keyword.
    std::string lower = lowercase(strip_markdown(raw));
    std::size_t pos = lower.find(keyword);
    if (pos != std::string::npos) {
        auto value = find_standalone_yes_no(lower, pos + keyword.size());
        if (value) return {value, true};
    }
    return answer;
}

}  // namespace

ClassificationParse parse_classification(const std::string& raw) {
    QuestionAnswer applicability = find_answer(raw, "Applicability", "applicab");
    QuestionAnswer adherence = find_answer(raw, "Adherence", "adheren");

    if (!applicability.value) return {std::nullopt, ParseStatus::Failed};

    if (!*applicability.value) {
        ParseStatus status = applicability.repaired ? ParseStatus::Repaired : ParseStatus::Clean;
        return {AdherenceLabel::NotApplicable, status};
    }
    if (!adherence.value) return {std::nullopt, ParseStatus::Failed};
    ParseStatus status = (applicability.repaired || adherence.repaired) ? ParseStatus::Repaired
                                                                        : ParseStatus::Clean;
    return {*adherence.value ? AdherenceLabel::Followed : AdherenceLabel::NotFollowed, status};
}

ScoreParse parse_score(const std::string& raw) {
    static const std::regex number_re(R"([-+]?[0-9]*\.?[0-9]+([eE][-+]?[0-9]+)?)");

    auto check_range = [](double value) {
        if (value < 0.0 || value > 1.0) {
            throw ValidationError("score " + std::to_string(value) + " outside [0,1]");
        }
        return value;
    };

    for (const auto& line : split_lines(raw)) {
        std::string t = trim_ws(strip_markdown(line));
        std::string lower = lowercase(t);
        if (lower.rfind("score", 0) == 0) {
            std::smatch m;
            if (std::regex_search(t, m, number_re)) {
                bool exact = t.rfind("SCORE:", 0) == 0;
                return {check_range(std::stod(m.str())), exact ? ParseStatus::Clean
                                                               : ParseStatus::Repaired};
            }
        }
    }
    // Fallback: last bare number anywhere in the response.
    std::string last;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), number_re);
         it != std::sregex_iterator(); ++it) {
        last = it->str();
    }
    if (last.empty()) throw ParseError("no numeric answer line in response");
    return {check_range(std::stod(last)), ParseStatus::Repaired};
}

// ---------------------------------------------------------------------------
// Run persistence

namespace {

ordered_json verdict_to_json(const ModelVerdict& v) {
    ordered_json doc;
    doc["type"] = "verdict";
    doc["function_id"] = v.function_id;
    if (v.practice_id) doc["practice_id"] = *v.practice_id;
    if (v.label) doc["label"] = label_token(*v.label);
    if (v.score) doc["score"] = *v.score;
    doc["parse_status"] = parse_status_token(v.parse_status);
    doc["raw_response"] = v.raw_response;
    return doc;
}

ModelVerdict verdict_from_json(const json& doc) {
    ModelVerdict v;
    v.function_id = doc.at("function_id").get<std::string>();
    if (doc.contains("practice_id")) v.practice_id = doc.at("practice_id").get<int>();
    if (doc.contains("label")) {
        auto label = parse_label_token(doc.at("label").get<std::string>());
        if (!label) throw ParseError("bad label token in run file");
        v.label = *label;
    }
    if (doc.contains("score")) v.score = doc.at("score").get<double>();
    auto status = parse_parse_status_token(doc.at("parse_status").get<std::string>());
    if (!status) throw ParseError("bad parse_status token in run file");
    v.parse_status = *status;
    v.raw_response = doc.at("raw_response").get<std::string>();
    return v;
}

}  // namespace

std::string run_to_jsonl(const AssessmentRun& run) {
    std::ostringstream out;
    ordered_json header = {{"type", "header"},
                           {"model_id", run.model_id},
                           {"strategy", run.strategy},
                           {"template_version", run.template_version},
                           {"incomplete", run.incomplete},
                           {"verdict_count", run.verdicts.size()},
                           {"error_count", run.errors.size()}};
    out << header.dump() << '\n';
    for (const auto& v : run.verdicts) out << verdict_to_json(v).dump() << '\n';
    for (const auto& e : run.errors) {
        ordered_json doc = {{"type", "item_error"}, {"function_id", e.function_id}};
        if (e.practice_id) doc["practice_id"] = *e.practice_id;
        doc["message"] = e.message;
        out << doc.dump() << '\n';
    }
    return out.str();
}

AssessmentRun run_from_jsonl(const std::string& text) {
    AssessmentRun run;
    bool header_seen = false;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("run file line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string type = doc.value("type", "");
        try {
            if (type == "header") {
                run.model_id = doc.at("model_id").get<std::string>();
                run.strategy = doc.at("strategy").get<std::string>();
                run.template_version = doc.at("template_version").get<std::string>();
                run.incomplete = doc.value("incomplete", false);
                header_seen = true;
            } else if (type == "verdict") {
                run.verdicts.push_back(verdict_from_json(doc));
            } else if (type == "item_error") {
                RunItemError e;
                e.function_id = doc.at("function_id").get<std::string>();
                if (doc.contains("practice_id")) e.practice_id = doc.at("practice_id").get<int>();
                e.message = doc.at("message").get<std::string>();
                run.errors.push_back(std::move(e));
            } else {
                throw ParseError("run file line " + std::to_string(lineno) +
                                 ": unknown record type");
            }
        } catch (const json::exception& e) {
            throw ParseError("run file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!header_seen) throw ParseError("run file has no header record");
    return run;
}

AssessmentRun load_run(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open run file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_from_jsonl(buf.str());
}

void save_run(const AssessmentRun& run, const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write run file: " + path.string());
    out << run_to_jsonl(run);
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(ModelProfile profile, ResponseCache& cache, std::string template_version)
    : profile_(std::move(profile)), cache_(cache), template_version_(std::move(template_version)) {
    profile_.validate();
}

namespace {

std::string iso_timestamp_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Split "https://host[:port]/base/path" into client base and path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t path_start =
        url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string Gateway::http_complete(const std::string& prompt_text, std::string& metadata_out) {
    const char* credential = nullptr;
    if (!profile_.credential_env_var.empty()) {
        credential = std::getenv(profile_.credential_env_var.c_str());
    }
    if (!credential) {
        throw NetworkError("credential env var '" + profile_.credential_env_var +
                           "' not set for model " + profile_.model_id);
    }

    auto [base, path_prefix] = split_url(profile_.endpoint_url);
    httplib::Client client(base);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);

    std::string path;
    json body;
    httplib::Headers headers;
    if (profile_.provider_kind == ProviderKind::OpenAiCompatible) {
        path = path_prefix.empty() ? "/v1/chat/completions" : path_prefix;
        body = {{"model", profile_.model_id},
                {"temperature", profile_.temperature},
                {"max_tokens", profile_.max_output_tokens},
                {"messages", json::array({{{"role", "user"}, {"content", prompt_text}}})}};
        headers = {{"Authorization", std::string("Bearer ") + credential}};
    } else {
        path = (path_prefix.empty() ? "/v1beta/models/" + profile_.model_id + ":generateContent"
                                    : path_prefix) +
               "?key=" + credential;
        body = {{"contents", json::array({{{"parts", json::array({{{"text", prompt_text}}})}}})},
                {"generationConfig",
                 {{"temperature", profile_.temperature},
                  {"maxOutputTokens", profile_.max_output_tokens}}}};
    }

    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::seconds(1L << (attempt - 1)));
        }
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
            if (res->status >= 400 && res->status < 500 && res->status != 429) break;
            continue;
        }
        try {
            json doc = json::parse(res->body);
            metadata_out = json({{"http_status", res->status}}).dump();
            if (profile_.provider_kind == ProviderKind::OpenAiCompatible) {
                return doc.at("choices").at(0).at("message").at("content").get<std::string>();
            }
            return doc.at("candidates")
                .at(0)
                .at("content")
                .at("parts")
                .at(0)
                .at("text")
                .get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("unexpected response shape: ") + e.what();
        }
    }
    throw NetworkError("dispatch to " + profile_.model_id + " failed: " + last_error);
}

std::string Gateway::dispatch(const RenderedPrompt& prompt) {
    check_token_budget(prompt, profile_.token_budget);
    const std::string key = cache_key(profile_.model_id, template_version_, prompt.content_hash);
    if (auto hit = cache_.lookup(key)) {
        return hit->response_text;
    }
    if (profile_.provider_kind == ProviderKind::Replay) {
        throw ReplayMissError(key);
    }
    std::string metadata;
    std::string response = http_complete(prompt.text, metadata);
    CacheEntry entry;
    entry.key = key;
    entry.request_text = prompt.text;
    entry.response_text = response;
    entry.timestamp = iso_timestamp_now();
    entry.provider_metadata = metadata;
    cache_.append(entry);
    return response;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct WorkItem {
    const FunctionRecord* function;
    std::optional<int> practice_id;
};

struct ItemOutcome {
    std::optional<ModelVerdict> verdict;
    std::optional<RunItemError> error;
};

}  // namespace

AssessmentRun run_sweep(const Corpus& corpus, const Catalog& catalog, PromptStrategy strategy,
                        const ModelProfile& profile, int parallelism,
                        const PromptRenderer& renderer, const CallGraph& graph,
                        ResponseCache& cache,
                        const std::map<std::string, std::map<int, AdherenceLabel>>* prior_verdicts) {
    if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
    if (strategy == PromptStrategy::ScoreEstimation && !prior_verdicts) {
        throw ValidationError("score estimation sweep needs prior verdicts");
    }

    // Canonical order: function_id ascending, then practice_id ascending.
    std::vector<const FunctionRecord*> functions;
    for (const auto& rec : corpus.functions()) functions.push_back(&rec);
    std::sort(functions.begin(), functions.end(),
              [](const FunctionRecord* a, const FunctionRecord* b) {
                  return a->function_id < b->function_id;
              });

    std::vector<WorkItem> items;
    for (const FunctionRecord* rec : functions) {
        if (strategy == PromptStrategy::ScoreEstimation) {
            items.push_back({rec, std::nullopt});
        } else {
            for (int p = 1; p <= kPracticeCount; ++p) items.push_back({rec, p});
        }
    }

    Gateway gateway(profile, cache, renderer.templates().version());
    std::vector<ItemOutcome> outcomes(items.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            const WorkItem& item = items[i];
            ItemOutcome& outcome = outcomes[i];
            try {
                RenderedPrompt prompt;
                if (strategy == PromptStrategy::ScoreEstimation) {
                    auto table = prior_verdicts->find(item.function->function_id);
                    if (table == prior_verdicts->end()) {
                        throw ValidationError("no prior verdicts for function '" +
                                              item.function->function_id + "'");
                    }
                    prompt = renderer.render_score_estimation(*item.function, table->second);
                } else {
                    prompt = renderer.render(strategy, *item.function,
                                             catalog.at(*item.practice_id), graph, corpus);
                }
                std::string raw = gateway.dispatch(prompt);

                ModelVerdict verdict;
                verdict.function_id = item.function->function_id;
                verdict.practice_id = item.practice_id;
                verdict.raw_response = raw;
                if (strategy == PromptStrategy::ScoreEstimation) {
                    try {
                        ScoreParse parsed = parse_score(raw);
                        verdict.score = parsed.value;
                        verdict.parse_status = parsed.status;
                    } catch (const std::exception&) {
                        verdict.parse_status = ParseStatus::Failed;
                    }
                } else {
                    ClassificationParse parsed = parse_classification(raw);
                    verdict.label = parsed.label;
                    verdict.parse_status = parsed.status;
                }
                outcome.verdict = std::move(verdict);
            } catch (const std::exception& e) {
                outcome.error = RunItemError{item.function->function_id, item.practice_id,
                                             e.what()};
            }
        }
    };

    std::vector<std::thread> threads;
    int thread_count = std::min<std::size_t>(static_cast<std::size_t>(parallelism), items.size());
    for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    AssessmentRun run;
    run.model_id = profile.model_id;
    run.strategy = strategy_token(strategy);
    run.template_version = renderer.templates().version();
    for (auto& outcome : outcomes) {
        if (outcome.verdict) run.verdicts.push_back(std::move(*outcome.verdict));
        if (outcome.error) run.errors.push_back(std::move(*outcome.error));
    }
    run.incomplete = !run.errors.empty();
    return run;
}

}  // namespace trustbench
