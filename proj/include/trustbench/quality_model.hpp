#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trustbench/adherence.hpp"
#include "trustbench/corpus.hpp"
#include "trustbench/gateway.hpp"
#include "trustbench/practices.hpp"

namespace trustbench {

enum class ZeroMode {
    PureZero,  // a violated practice contributes exactly 0; conjunction collapses to 0
    Floor,     // a violated practice contributes epsilon, yielding graded near-zero scores
};

std::string zero_mode_token(ZeroMode mode);
std::optional<ZeroMode> parse_zero_mode_token(const std::string& token);

struct HierarchyNode;

// A child of a hierarchy node: either a practice leaf or a nested node,
// carrying its weight within the parent.
struct HierarchyChild {
    double weight = 0.0;
    std::variant<int, std::shared_ptr<HierarchyNode>> target;  // practice_id or subtree
};

struct HierarchyNode {
    std::string node_id;
    double exponent = -1.0;
    std::vector<HierarchyChild> children;  // weights sum to 1 per node
};

struct QualityModelConfig {
    WeightVector weights;          // used by the flat model
    double exponent_r = -1.0;      // r < 0 gives conjunctive behavior
    ZeroMode zero_mode = ZeroMode::Floor;
    double epsilon = 0.01;         // Floor mode substitute for 0
    std::shared_ptr<HierarchyNode> hierarchy;  // optional; flat when absent
    std::map<int, double> thresholds;          // reserved, unused

    // Throws ValidationError on hard violations; returns human-readable flags
    // for allowed-but-unusual settings (e.g. non-negative exponent).
    std::vector<std::string> validate() const;
};

struct TrustScore {
    std::string function_id;
    std::optional<double> value;  // empty == Undefined (no applicable practice)
    int applicable_count = 0;
    std::vector<int> violated_practices;
    std::string mode_used;

    bool defined() const { return value.has_value(); }
};

// Weighted power mean (Σ w_i x_i^r)^(1/r); r == 0 is the geometric-mean
// limit. With r < 0 a zero input annihilates the mean.
double weighted_power_mean(const std::vector<std::pair<double, double>>& weighted_values,
                           double exponent);

// Score one function from its 16 (or toy-model-sized) practice labels.
// Label keys must match the config weight keys exactly.
TrustScore trust_score(const std::map<int, AdherenceLabel>& labels,
                       const QualityModelConfig& config, const std::string& function_id = "");

// Failed-parse verdicts count as NotFollowed (unverifiable implies untrusted).
std::map<std::string, TrustScore> score_run(const AssessmentRun& run,
                                            const QualityModelConfig& config);

std::map<std::string, TrustScore> reference_scores(const GroundTruthMatrix& ground_truth,
                                                   const QualityModelConfig& config);

// Config file (JSON) mirroring QualityModelConfig; "weights": "uniform" or a
// practice_id -> weight map.
QualityModelConfig load_qm_config(const std::filesystem::path& path, const Catalog& catalog);
QualityModelConfig default_qm_config(const Catalog& catalog);

// CSV `function_id,score,applicable_count,violated_ids` (score 12 decimals,
// `NA` for undefined, violated ids joined with ';').
std::string scores_to_csv(const std::map<std::string, TrustScore>& scores);

}  // namespace trustbench
