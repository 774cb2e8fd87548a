#include "trustbench/quality_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trustbench/errors.hpp"

namespace trustbench {

using nlohmann::json;

std::string zero_mode_token(ZeroMode mode) {
    switch (mode) {
        case ZeroMode::PureZero: return "pure-zero";
        case ZeroMode::Floor: return "floor";
    }
    return "?";
}

std::optional<ZeroMode> parse_zero_mode_token(const std::string& token) {
    if (token == "pure-zero") return ZeroMode::PureZero;
    if (token == "floor") return ZeroMode::Floor;
    return std::nullopt;
}

namespace {

void collect_leaf_practices(const HierarchyNode& node, std::set<int>& out) {
    double weight_sum = 0.0;
    if (node.children.empty()) {
        throw ValidationError("hierarchy node '" + node.node_id + "' has no children");
    }
    for (const auto& child : node.children) {
        weight_sum += child.weight;
        if (child.weight <= 0.0) {
            throw ValidationError("hierarchy node '" + node.node_id +
                                  "' has a non-positive child weight");
        }
        if (std::holds_alternative<int>(child.target)) {
            int practice_id = std::get<int>(child.target);
            if (!out.insert(practice_id).second) {
                throw ValidationError("practice " + std::to_string(practice_id) +
                                      " appears in more than one hierarchy leaf");
            }
        } else {
            collect_leaf_practices(*std::get<std::shared_ptr<HierarchyNode>>(child.target), out);
        }
    }
    if (std::abs(weight_sum - 1.0) > 1e-12) {
        throw ValidationError("hierarchy node '" + node.node_id + "' weights sum to " +
                              std::to_string(weight_sum) + ", expected 1");
    }
}

}  // namespace

std::vector<std::string> QualityModelConfig::validate() const {
    std::vector<std::string> flags;
    weights.validate();
    if (exponent_r >= 0.0) {
        flags.push_back("exponent_r = " + std::to_string(exponent_r) +
                        " is not conjunctive (expected r < 0)");
    }
    if (zero_mode == ZeroMode::Floor && (epsilon <= 0.0 || epsilon >= 1.0)) {
        throw ValidationError("floor epsilon must lie in (0,1)");
    }
    if (hierarchy) {
        std::set<int> leaves;
        collect_leaf_practices(*hierarchy, leaves);
        std::set<int> expected;
        for (const auto& [id, w] : weights.weights) {
            (void)w;
            expected.insert(id);
        }
        if (leaves != expected) {
            throw ValidationError("hierarchy leaves do not cover exactly the weighted practices");
        }
    }
    return flags;
}

double weighted_power_mean(const std::vector<std::pair<double, double>>& weighted_values,
                           double exponent) {
    if (weighted_values.empty()) throw ValidationError("power mean of empty set");
    if (exponent == 0.0) {
        double log_sum = 0.0;
        for (const auto& [w, x] : weighted_values) {
            if (x <= 0.0) return 0.0;
            log_sum += w * std::log(x);
        }
        return std::exp(log_sum);
    }
    if (exponent < 0.0) {
        for (const auto& [w, x] : weighted_values) {
            (void)w;
            if (x == 0.0) return 0.0;  // conjunctive annihilation
        }
    }
    bool all_ones = true;
    double sum = 0.0;
    for (const auto& [w, x] : weighted_values) {
        if (x != 1.0) all_ones = false;
        sum += w * std::pow(x, exponent);
    }
    if (all_ones) return 1.0;  // exact at the top extreme
    return std::pow(sum, 1.0 / exponent);
}

namespace {

struct LeafValues {
    // practice_id -> aggregation input r_i; NA practices are absent.
    std::map<int, double> values;
};

// Node score with per-node NA redistribution; nullopt when the whole subtree
// is NA.
std::optional<double> score_node(const HierarchyNode& node, const LeafValues& leaves) {
    std::vector<std::pair<double, double>> inputs;
    double surviving_weight = 0.0;
    for (const auto& child : node.children) {
        std::optional<double> value;
        if (std::holds_alternative<int>(child.target)) {
            auto it = leaves.values.find(std::get<int>(child.target));
            if (it != leaves.values.end()) value = it->second;
        } else {
            value = score_node(*std::get<std::shared_ptr<HierarchyNode>>(child.target), leaves);
        }
        if (value) {
            inputs.emplace_back(child.weight, *value);
            surviving_weight += child.weight;
        }
    }
    if (inputs.empty()) return std::nullopt;
    for (auto& [w, x] : inputs) {
        (void)x;
        w /= surviving_weight;
    }
    return weighted_power_mean(inputs, node.exponent);
}

}  // namespace

TrustScore trust_score(const std::map<int, AdherenceLabel>& labels,
                       const QualityModelConfig& config, const std::string& function_id) {
    config.validate();
    for (const auto& [id, w] : config.weights.weights) {
        (void)w;
        if (!labels.contains(id)) {
            throw ValidationError("labels missing practice " + std::to_string(id));
        }
    }
    if (labels.size() != config.weights.weights.size()) {
        throw ValidationError("labels cover practices outside the weight vector");
    }

    TrustScore result;
    result.function_id = function_id;
    result.mode_used = zero_mode_token(config.zero_mode);
    if (config.zero_mode == ZeroMode::Floor) {
        result.mode_used += "(eps=" + std::to_string(config.epsilon) + ")";
    }

    LeafValues leaves;
    for (const auto& [id, label] : labels) {
        switch (label) {
            case AdherenceLabel::Followed:
                leaves.values[id] = 1.0;
                ++result.applicable_count;
                break;
            case AdherenceLabel::NotFollowed:
                leaves.values[id] =
                    config.zero_mode == ZeroMode::Floor ? config.epsilon : 0.0;
                result.violated_practices.push_back(id);
                ++result.applicable_count;
                break;
            case AdherenceLabel::NotApplicable:
                break;  // excluded; weight redistributed below
        }
    }
    if (result.applicable_count == 0) {
        return result;  // Undefined: no applicable practice
    }

    if (config.hierarchy) {
        result.value = score_node(*config.hierarchy, leaves);
        return result;
    }

    WeightVector applicable = redistribute_for_na(config.weights, labels);
    std::vector<std::pair<double, double>> inputs;
    for (const auto& [id, w] : applicable.weights) {
        inputs.emplace_back(w, leaves.values.at(id));
    }
    result.value = weighted_power_mean(inputs, config.exponent_r);
    return result;
}

std::map<std::string, TrustScore> score_run(const AssessmentRun& run,
                                            const QualityModelConfig& config) {
    if (run.incomplete) {
        throw ValidationError("cannot score incomplete run (" +
                              std::to_string(run.errors.size()) + " item errors)");
    }
    std::map<std::string, std::map<int, AdherenceLabel>> labels_by_function;
    for (const auto& verdict : run.verdicts) {
        if (!verdict.practice_id) {
            throw ValidationError("run contains score verdicts; expected classification");
        }
        AdherenceLabel label = AdherenceLabel::NotFollowed;  // Failed => untrusted
        if (verdict.parse_status != ParseStatus::Failed && verdict.label) {
            label = *verdict.label;
        }
        labels_by_function[verdict.function_id][*verdict.practice_id] = label;
    }
    std::map<std::string, TrustScore> scores;
    for (const auto& [function_id, labels] : labels_by_function) {
        if (labels.size() != config.weights.weights.size()) {
            throw ValidationError("run incomplete for function '" + function_id + "': " +
                                  std::to_string(labels.size()) + " practice verdicts");
        }
        scores[function_id] = trust_score(labels, config, function_id);
    }
    return scores;
}

std::map<std::string, TrustScore> reference_scores(const GroundTruthMatrix& ground_truth,
                                                   const QualityModelConfig& config) {
    std::set<std::string> function_ids;
    for (const auto& [key, label] : ground_truth.entries) {
        (void)label;
        function_ids.insert(key.first);
    }
    std::map<std::string, TrustScore> scores;
    for (const auto& function_id : function_ids) {
        scores[function_id] = trust_score(ground_truth.labels_for(function_id), config, function_id);
    }
    return scores;
}

namespace {

std::shared_ptr<HierarchyNode> hierarchy_from_json(const json& doc) {
    auto node = std::make_shared<HierarchyNode>();
    node->node_id = doc.at("node_id").get<std::string>();
    node->exponent = doc.value("exponent", -1.0);
    for (const auto& child : doc.at("children")) {
        HierarchyChild hc;
        hc.weight = child.at("weight").get<double>();
        if (child.contains("practice_id")) {
            hc.target = child.at("practice_id").get<int>();
        } else if (child.contains("node")) {
            hc.target = hierarchy_from_json(child.at("node"));
        } else {
            throw ParseError("hierarchy child needs practice_id or node");
        }
        node->children.push_back(std::move(hc));
    }
    return node;
}

}  // namespace

QualityModelConfig default_qm_config(const Catalog& catalog) {
    QualityModelConfig config;
    config.weights = uniform_weights(catalog);
    return config;
}

QualityModelConfig load_qm_config(const std::filesystem::path& path, const Catalog& catalog) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open QM config: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("malformed QM config " + path.string() + ": " + e.what());
    }

    QualityModelConfig config;
    if (!doc.contains("weights") || doc.at("weights") == "uniform") {
        config.weights = uniform_weights(catalog);
    } else {
        for (const auto& [key, value] : doc.at("weights").items()) {
            config.weights.weights[std::stoi(key)] = value.get<double>();
        }
    }
    config.exponent_r = doc.value("exponent_r", -1.0);
    if (doc.contains("zero_mode")) {
        auto mode = parse_zero_mode_token(doc.at("zero_mode").get<std::string>());
        if (!mode) throw ParseError("QM config: unknown zero_mode");
        config.zero_mode = *mode;
    }
    config.epsilon = doc.value("epsilon", 0.01);
    if (doc.contains("hierarchy")) {
        config.hierarchy = hierarchy_from_json(doc.at("hierarchy"));
    }
    if (doc.contains("thresholds")) {
        for (const auto& [key, value] : doc.at("thresholds").items()) {
            config.thresholds[std::stoi(key)] = value.get<double>();
        }
    }
    config.validate();
    return config;
}

std::string scores_to_csv(const std::map<std::string, TrustScore>& scores) {
    std::ostringstream out;
    out << "function_id,score,applicable_count,violated_ids\n";
    char buf[32];
    for (const auto& [function_id, score] : scores) {
        out << function_id << ',';
        if (score.value) {
            std::snprintf(buf, sizeof(buf), "%.12f", *score.value);
            out << buf;
        } else {
            out << "NA";
        }
        out << ',' << score.applicable_count << ',';
        for (std::size_t i = 0; i < score.violated_practices.size(); ++i) {
            if (i > 0) out << ';';
            out << score.violated_practices[i];
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace trustbench
