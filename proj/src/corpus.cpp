#include "trustbench/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trustbench/errors.hpp"

namespace trustbench {

using nlohmann::json;

std::string variant_token(VariantKind kind) {
    switch (kind) {
        case VariantKind::Secure: return "Vx0";
        case VariantKind::FullyVulnerable: return "VxA";
        case VariantKind::SingleVulnerability: return "VxLine";
    }
    return "?";
}

std::optional<VariantKind> parse_variant_token(const std::string& token) {
    if (token == "Vx0") return VariantKind::Secure;
    if (token == "VxA") return VariantKind::FullyVulnerable;
    if (token == "VxLine") return VariantKind::SingleVulnerability;
    return std::nullopt;
}

Corpus::Corpus(std::vector<FunctionRecord> records, std::string language)
    : records_(std::move(records)), language_(std::move(language)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& rec = records_[i];
        if (rec.function_id.empty()) {
            throw ValidationError("function with empty function_id");
        }
        if (rec.source_text.empty()) {
            throw ValidationError("function '" + rec.function_id + "' has empty source_text");
        }
        if (rec.line_hint && rec.variant != VariantKind::SingleVulnerability) {
            throw ValidationError("function '" + rec.function_id +
                                  "' has line_hint but is not a VxLine variant");
        }
        if (rec.line_hint && *rec.line_hint <= 0) {
            throw ValidationError("function '" + rec.function_id + "' has non-positive line_hint");
        }
        auto [it, inserted] = index_.emplace(rec.function_id, i);
        (void)it;
        if (!inserted) {
            throw ValidationError("duplicate function_id '" + rec.function_id + "'");
        }
    }
    // Dangling callees are a warning: they may refer to external code.
    for (const auto& rec : records_) {
        for (const auto& callee : rec.declared_callees) {
            if (!index_.contains(callee)) {
                warnings_.push_back("function '" + rec.function_id +
                                    "' declares unknown callee '" + callee + "'");
            }
        }
    }
}

const FunctionRecord* Corpus::find(const std::string& function_id) const {
    auto it = index_.find(function_id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

const FunctionRecord& Corpus::at(const std::string& function_id) const {
    const FunctionRecord* rec = find(function_id);
    if (!rec) throw ValidationError("unknown function_id '" + function_id + "'");
    return *rec;
}

CorpusStats Corpus::stats() const {
    CorpusStats s;
    s.function_count = records_.size();
    std::set<std::string> services;
    std::set<std::pair<std::string, std::string>> operations;
    for (const auto& rec : records_) {
        services.insert(rec.service_id);
        operations.insert({rec.service_id, rec.operation_name});
        switch (rec.variant) {
            case VariantKind::Secure: ++s.secure_count; break;
            case VariantKind::FullyVulnerable: ++s.vulnerable_count; break;
            case VariantKind::SingleVulnerability: ++s.single_vuln_count; break;
        }
    }
    s.service_count = services.size();
    s.operation_count = operations.size();
    return s;
}

namespace {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

FunctionRecord record_from_json(const json& v, const std::string& service_id,
                                const std::string& operation_name,
                                const std::filesystem::path& base_dir) {
    FunctionRecord rec;
    rec.service_id = service_id;
    rec.operation_name = operation_name;
    rec.function_id = v.at("function_id").get<std::string>();

    const std::string variant = v.at("variant").get<std::string>();
    auto kind = parse_variant_token(variant);
    if (!kind) {
        throw ParseError("function '" + rec.function_id + "': unknown variant '" + variant + "'");
    }
    rec.variant = *kind;
    if (v.contains("line_hint")) {
        if (rec.variant != VariantKind::SingleVulnerability) {
            throw ParseError("function '" + rec.function_id + "': line_hint only valid for VxLine");
        }
        rec.line_hint = v.at("line_hint").get<int>();
    }
    if (v.contains("source_file")) {
        rec.source_text = read_text_file(base_dir / v.at("source_file").get<std::string>());
    } else if (v.contains("source_text")) {
        rec.source_text = v.at("source_text").get<std::string>();
    } else {
        throw ParseError("function '" + rec.function_id + "': needs source_file or source_text");
    }
    if (v.contains("declared_callees")) {
        rec.declared_callees = v.at("declared_callees").get<std::vector<std::string>>();
    }
    return rec;
}

Corpus corpus_from_manifest_json(const json& doc, const std::filesystem::path& base_dir) {
    std::vector<FunctionRecord> records;
    for (const auto& svc : doc.at("services")) {
        const std::string service_id = svc.at("service_id").get<std::string>();
        for (const auto& op : svc.at("operations")) {
            const std::string operation_name = op.at("operation_name").get<std::string>();
            for (const auto& v : op.at("variants")) {
                records.push_back(record_from_json(v, service_id, operation_name, base_dir));
            }
        }
    }
    std::string language = doc.value("language", "java");
    return Corpus(std::move(records), std::move(language));
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest_path) {
    json doc;
    try {
        doc = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw ParseError("malformed corpus manifest " + manifest_path.string() + ": " + e.what());
    }
    try {
        return corpus_from_manifest_json(doc, manifest_path.parent_path());
    } catch (const json::exception& e) {
        throw ParseError("malformed corpus manifest " + manifest_path.string() + ": " + e.what());
    }
}

std::string corpus_to_json(const Corpus& corpus) {
    // Group by (service, operation) preserving first-appearance order.
    json services = json::array();
    std::map<std::string, std::size_t> svc_index;
    for (const auto& rec : corpus.functions()) {
        if (!svc_index.contains(rec.service_id)) {
            svc_index[rec.service_id] = services.size();
            services.push_back({{"service_id", rec.service_id}, {"operations", json::array()}});
        }
        json& svc = services[svc_index[rec.service_id]];
        json* op = nullptr;
        for (auto& candidate : svc["operations"]) {
            if (candidate["operation_name"] == rec.operation_name) {
                op = &candidate;
                break;
            }
        }
        if (!op) {
            svc["operations"].push_back(
                {{"operation_name", rec.operation_name}, {"variants", json::array()}});
            op = &svc["operations"].back();
        }
        json v = {{"function_id", rec.function_id},
                  {"variant", variant_token(rec.variant)},
                  {"source_text", rec.source_text}};
        if (rec.line_hint) v["line_hint"] = *rec.line_hint;
        if (!rec.declared_callees.empty()) v["declared_callees"] = rec.declared_callees;
        (*op)["variants"].push_back(std::move(v));
    }
    json doc = {{"language", corpus.language()}, {"services", std::move(services)}};
    return doc.dump(2);
}

Corpus corpus_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed corpus JSON: ") + e.what());
    }
    return corpus_from_manifest_json(doc, {});
}

AdherenceLabel GroundTruthMatrix::at(const std::string& function_id, int practice_id) const {
    auto it = entries.find({function_id, practice_id});
    if (it == entries.end()) {
        throw ValidationError("ground truth missing pair (" + function_id + ", practice " +
                              std::to_string(practice_id) + ")");
    }
    return it->second;
}

std::map<int, AdherenceLabel> GroundTruthMatrix::labels_for(const std::string& function_id) const {
    std::map<int, AdherenceLabel> out;
    for (int p = 1; p <= kPracticeCount; ++p) {
        out[p] = at(function_id, p);
    }
    return out;
}

GroundTruthMatrix load_ground_truth(const std::filesystem::path& path, const Corpus& corpus) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open ground truth file: " + path.string());

    GroundTruthMatrix matrix;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            // Optional metadata comments: "# annotator: ...", "# date: ...".
            if (line.rfind("# annotator:", 0) == 0) matrix.annotator = line.substr(12);
            if (line.rfind("# date:", 0) == 0) matrix.curation_date = line.substr(7);
            continue;
        }
        if (!header_seen) {
            if (line != "function_id,practice_id,label") {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": expected header 'function_id,practice_id,label'");
            }
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string function_id, practice_str, token;
        if (!std::getline(row, function_id, ',') || !std::getline(row, practice_str, ',') ||
            !std::getline(row, token)) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        int practice_id = 0;
        try {
            practice_id = std::stoi(practice_str);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": bad practice_id '" + practice_str + "'");
        }
        if (practice_id < 1 || practice_id > kPracticeCount) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": practice_id " + std::to_string(practice_id) +
                                  " outside 1..16");
        }
        if (!corpus.contains(function_id)) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": unknown function_id '" + function_id + "'");
        }
        auto label = parse_label_token(token);
        if (!label) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": unparsable label token '" + token + "'");
        }
        auto [it, inserted] = matrix.entries.emplace(std::make_pair(function_id, practice_id), *label);
        (void)it;
        if (!inserted) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": duplicate entry for (" + function_id + ", practice " +
                                  std::to_string(practice_id) + ")");
        }
    }
    if (!header_seen) throw ParseError(path.string() + ": empty ground truth file");

    // Completeness: missing pairs are a load error, never an implicit NA.
    for (const auto& rec : corpus.functions()) {
        for (int p = 1; p <= kPracticeCount; ++p) {
            if (!matrix.entries.contains({rec.function_id, p})) {
                throw ValidationError("ground truth incomplete: missing pair (" +
                                      rec.function_id + ", practice " + std::to_string(p) + ")");
            }
        }
    }
    return matrix;
}

VariantPairing variant_pairs(const Corpus& corpus) {
    // Key: (service, operation) -> the Vx0 and VxA sides, first occurrence wins.
    std::map<std::pair<std::string, std::string>, std::pair<const FunctionRecord*, const FunctionRecord*>>
        sides;
    for (const auto& rec : corpus.functions()) {
        auto& slot = sides[{rec.service_id, rec.operation_name}];
        if (rec.variant == VariantKind::Secure && !slot.first) slot.first = &rec;
        if (rec.variant == VariantKind::FullyVulnerable && !slot.second) slot.second = &rec;
    }
    VariantPairing result;
    for (const auto& [key, slot] : sides) {
        (void)key;
        if (slot.first && slot.second) {
            result.pairs.push_back({slot.first->function_id, slot.second->function_id});
        } else {
            ++result.omitted_services;
        }
    }
    return result;
}

}  // namespace trustbench
