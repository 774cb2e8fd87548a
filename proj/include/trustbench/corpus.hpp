#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trustbench/adherence.hpp"

namespace trustbench {

constexpr int kPracticeCount = 16;

enum class VariantKind {
    Secure,               // Vx0
    FullyVulnerable,      // VxA
    SingleVulnerability,  // VxLine
};

std::string variant_token(VariantKind kind);
std::optional<VariantKind> parse_variant_token(const std::string& token);

struct FunctionRecord {
    std::string function_id;
    std::string service_id;
    std::string operation_name;
    VariantKind variant = VariantKind::Secure;
    std::optional<int> line_hint;  // VxLine only
    std::string source_text;
    std::vector<std::string> declared_callees;
};

struct CorpusStats {
    std::size_t function_count = 0;
    std::size_t service_count = 0;
    std::size_t operation_count = 0;  // distinct (service, operation) pairs
    std::size_t secure_count = 0;
    std::size_t vulnerable_count = 0;
    std::size_t single_vuln_count = 0;
};

// Immutable after load; safe to share across threads.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<FunctionRecord> records, std::string language = "java");

    const std::vector<FunctionRecord>& functions() const { return records_; }
    const FunctionRecord* find(const std::string& function_id) const;
    const FunctionRecord& at(const std::string& function_id) const;
    bool contains(const std::string& function_id) const { return find(function_id) != nullptr; }

    const std::string& language() const { return language_; }
    CorpusStats stats() const;

    // Warnings accumulated at load time (e.g. dangling declared_callees).
    const std::vector<std::string>& warnings() const { return warnings_; }
    void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

private:
    std::vector<FunctionRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> warnings_;
    std::string language_ = "java";
};

struct VariantPair {
    std::string secure_id;      // Vx0 side
    std::string vulnerable_id;  // VxA side
};

struct VariantPairing {
    std::vector<VariantPair> pairs;
    std::size_t omitted_services = 0;  // services lacking one side
};

struct GroundTruthMatrix {
    std::map<std::pair<std::string, int>, AdherenceLabel> entries;
    std::string annotator;
    std::string curation_date;  // ISO-8601

    AdherenceLabel at(const std::string& function_id, int practice_id) const;
    std::map<int, AdherenceLabel> labels_for(const std::string& function_id) const;
};

// Manifest is a JSON document referencing per-function source files;
// see README for the schema.
Corpus load_corpus(const std::filesystem::path& manifest_path);

// Serialize back to a single self-contained JSON document (sources inlined).
std::string corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const std::string& json_text);

// CSV `function_id,practice_id,label` with tokens 1|0|NA. The matrix must be
// complete: every (function, practice) pair present.
GroundTruthMatrix load_ground_truth(const std::filesystem::path& path, const Corpus& corpus);

VariantPairing variant_pairs(const Corpus& corpus);

}  // namespace trustbench
