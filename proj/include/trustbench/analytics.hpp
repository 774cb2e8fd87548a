#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trustbench/corpus.hpp"
#include "trustbench/gateway.hpp"
#include "trustbench/quality_model.hpp"

namespace trustbench {

// Rows = truth, columns = prediction; axis order Followed, NotFollowed,
// NotApplicable. Failed-parse verdicts are excluded and counted separately.
struct ConfusionMatrix3 {
    std::array<std::array<long, 3>, 3> counts{};
    long excluded = 0;

    long total() const;
};

int label_axis(AdherenceLabel label);  // 0 Followed, 1 NotFollowed, 2 NotApplicable

struct MacroMetrics {
    double accuracy = 0.0;           // overall: trace / total
    double balanced_accuracy = 0.0;  // mean per-class recall
    double precision = 0.0;          // macro
    double recall = 0.0;             // macro
    double f1 = 0.0;                 // macro
    std::array<double, 3> per_class_f1{};
    int absent_classes = 0;  // classes with no truth and no prediction mass
};

enum class MannWhitneyMethod { Exact, NormalApprox };

struct MannWhitneyResult {
    double u_statistic = 0.0;  // U of the first sample
    double p_value = 1.0;      // two-sided
    MannWhitneyMethod method = MannWhitneyMethod::NormalApprox;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    bool degenerate = false;  // all values identical across both samples
};

struct GroupStats {
    std::string name;
    std::size_t n = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct SeparationReport {
    GroupStats secure;
    GroupStats vulnerable;
    MannWhitneyResult test;
    bool iqr_overlap = false;
    std::size_t excluded_pairs = 0;  // pair members without a defined score
};

ConfusionMatrix3 confusion(const AssessmentRun& run, const GroundTruthMatrix& truth);

MacroMetrics macro_metrics(const ConfusionMatrix3& cm);

// Mean absolute error over the shared key set; throws on empty intersection.
double mae(const std::map<std::string, double>& predicted,
           const std::map<std::string, double>& reference);

// Expected band for direct score estimation error.
bool mae_in_expected_band(double value);

// Exact enumeration (count recurrence) for tie-free samples with
// n1 + n2 <= exact_threshold; tie-corrected normal approximation with
// continuity correction otherwise.
MannWhitneyResult mann_whitney_u(const std::vector<double>& sample_a,
                                 const std::vector<double>& sample_b,
                                 std::size_t exact_threshold = 20);

// Five-number summary using linear interpolation between order statistics.
GroupStats five_number_summary(std::string name, std::vector<double> values);

SeparationReport separation_report(const std::map<std::string, TrustScore>& scores,
                                   const std::vector<VariantPair>& pairs);

// Export shapes used by the CLI.
struct MetricsRow {
    std::string model;
    std::string strategy;
    MacroMetrics metrics;
    long excluded = 0;
};

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

// model x practice matrix of per-practice macro F1 over the run's pairs.
std::map<int, MacroMetrics> per_practice_metrics(const AssessmentRun& run,
                                                 const GroundTruthMatrix& truth);
std::string heatmap_to_csv(
    const std::map<std::string, std::map<int, MacroMetrics>>& per_model_practice_f1);

std::string boxplot_to_csv(const std::vector<GroupStats>& groups);

}  // namespace trustbench
