#include "trustbench/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "trustbench/errors.hpp"

namespace trustbench {

long ConfusionMatrix3::total() const {
    long sum = 0;
    for (const auto& row : counts) {
        for (long cell : row) sum += cell;
    }
    return sum;
}

int label_axis(AdherenceLabel label) {
    switch (label) {
        case AdherenceLabel::Followed: return 0;
        case AdherenceLabel::NotFollowed: return 1;
        case AdherenceLabel::NotApplicable: return 2;
    }
    return -1;
}

ConfusionMatrix3 confusion(const AssessmentRun& run, const GroundTruthMatrix& truth) {
    std::set<std::pair<std::string, int>> run_pairs;
    for (const auto& verdict : run.verdicts) {
        if (!verdict.practice_id) {
            throw ValidationError("confusion needs a classification run");
        }
        run_pairs.insert({verdict.function_id, *verdict.practice_id});
    }
    std::set<std::pair<std::string, int>> truth_pairs;
    for (const auto& [key, label] : truth.entries) {
        (void)label;
        truth_pairs.insert(key);
    }
    if (run_pairs != truth_pairs) {
        throw ValidationError("coverage mismatch: run has " +
                              std::to_string(run_pairs.size()) + " pairs, ground truth " +
                              std::to_string(truth_pairs.size()));
    }

    ConfusionMatrix3 cm;
    for (const auto& verdict : run.verdicts) {
        if (verdict.parse_status == ParseStatus::Failed || !verdict.label) {
            ++cm.excluded;
            continue;
        }
        AdherenceLabel truth_label = truth.at(verdict.function_id, *verdict.practice_id);
        ++cm.counts[static_cast<std::size_t>(label_axis(truth_label))]
                   [static_cast<std::size_t>(label_axis(*verdict.label))];
    }
    return cm;
}

MacroMetrics macro_metrics(const ConfusionMatrix3& cm) {
    const long total = cm.total();
    if (total == 0) throw ValidationError("empty confusion matrix");

    MacroMetrics m;
    long trace = 0;
    double precision_sum = 0.0, recall_sum = 0.0, f1_sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        long tp = cm.counts[c][c];
        long fp = 0, fn = 0;
        for (std::size_t other = 0; other < 3; ++other) {
            if (other == c) continue;
            fp += cm.counts[other][c];
            fn += cm.counts[c][other];
        }
        trace += tp;
        // Absent classes stay in the 3-class denominator, contributing 0.
        if (tp + fp + fn == 0) ++m.absent_classes;
        double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
        double recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
        double f1 = (precision + recall) == 0.0 ? 0.0
                                                : 2.0 * precision * recall / (precision + recall);
        m.per_class_f1[c] = f1;
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
    m.precision = precision_sum / 3.0;
    m.recall = recall_sum / 3.0;
    m.balanced_accuracy = m.recall;  // mean per-class recall
    m.f1 = f1_sum / 3.0;
    return m;
}

double mae(const std::map<std::string, double>& predicted,
           const std::map<std::string, double>& reference) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [key, value] : predicted) {
        auto it = reference.find(key);
        if (it == reference.end()) continue;
        sum += std::abs(value - it->second);
        ++n;
    }
    if (n == 0) throw ValidationError("MAE: no shared keys between score maps");
    return sum / static_cast<double>(n);
}

bool mae_in_expected_band(double value) { return value >= 0.40 && value <= 0.60; }

namespace {

// Midrank assignment over the pooled sample.
std::vector<double> midranks(const std::vector<double>& pooled) {
    std::vector<std::size_t> order(pooled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(pooled.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

// P(U <= u) under the null for tie-free samples, via the count recurrence.
double exact_cdf(std::size_t n1, std::size_t n2, double u) {
    const std::size_t u_max = n1 * n2;
    // f(m, n, k) = f(m-1, n, k-n) + f(m, n-1, k); iterate n from 0 upward.
    std::vector<std::vector<double>> prev(n1 + 1, std::vector<double>(u_max + 1, 0.0));
    for (std::size_t m = 0; m <= n1; ++m) prev[m][0] = 1.0;  // n = 0
    for (std::size_t n = 1; n <= n2; ++n) {
        std::vector<std::vector<double>> cur(n1 + 1, std::vector<double>(u_max + 1, 0.0));
        for (std::size_t k = 0; k <= u_max; ++k) cur[0][k] = (k == 0) ? 1.0 : 0.0;
        for (std::size_t m = 1; m <= n1; ++m) {
            for (std::size_t k = 0; k <= u_max; ++k) {
                double via_first = (k >= n) ? cur[m - 1][k - n] : 0.0;
                cur[m][k] = via_first + prev[m][k];
            }
        }
        prev = std::move(cur);
    }
    double total = 0.0, below = 0.0;
    for (std::size_t k = 0; k <= u_max; ++k) {
        total += prev[n1][k];
        if (static_cast<double>(k) <= u + 1e-9) below += prev[n1][k];
    }
    return below / total;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& sample_a,
                                 const std::vector<double>& sample_b,
                                 std::size_t exact_threshold) {
    if (sample_a.empty() || sample_b.empty()) {
        throw ValidationError("Mann-Whitney needs non-empty samples");
    }
    const std::size_t n1 = sample_a.size();
    const std::size_t n2 = sample_b.size();
    const std::size_t n = n1 + n2;

    std::vector<double> pooled = sample_a;
    pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
    std::vector<double> ranks = midranks(pooled);

    double r1 = 0.0;
    for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
    double u1 = r1 - static_cast<double>(n1) * (n1 + 1) / 2.0;
    double u2 = static_cast<double>(n1) * static_cast<double>(n2) - u1;

    MannWhitneyResult result;
    result.u_statistic = u1;
    result.n1 = n1;
    result.n2 = n2;

    // Tie bookkeeping for the variance correction and the exact-path guard.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    bool has_ties = false;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        double t = static_cast<double>(j - i + 1);
        if (t > 1.0) {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }
    if (sorted.front() == sorted.back()) {
        result.degenerate = true;
        result.p_value = 1.0;
        result.method = MannWhitneyMethod::NormalApprox;
        return result;
    }

    if (!has_ties && n <= exact_threshold) {
        result.method = MannWhitneyMethod::Exact;
        double u_small = std::min(u1, u2);
        double p = 2.0 * exact_cdf(n1, n2, u_small);
        result.p_value = std::min(1.0, p);
        return result;
    }

    result.method = MannWhitneyMethod::NormalApprox;
    const double mean = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
    const double nn = static_cast<double>(n);
    double variance = (static_cast<double>(n1) * n2 / 12.0) *
                      ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (variance <= 0.0) {
        result.degenerate = true;
        result.p_value = 1.0;
        return result;
    }
    double diff = u1 - mean;
    // Continuity correction toward the mean.
    if (diff > 0.5) diff -= 0.5;
    else if (diff < -0.5) diff += 0.5;
    else diff = 0.0;
    double z = diff / std::sqrt(variance);
    result.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(z)));
    return result;
}

GroupStats five_number_summary(std::string name, std::vector<double> values) {
    if (values.empty()) throw ValidationError("five-number summary of empty group");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double p) {
        double h = p * static_cast<double>(values.size() - 1);
        std::size_t lo = static_cast<std::size_t>(std::floor(h));
        std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    GroupStats stats;
    stats.name = std::move(name);
    stats.n = values.size();
    stats.min = values.front();
    stats.q1 = quantile(0.25);
    stats.median = quantile(0.5);
    stats.q3 = quantile(0.75);
    stats.max = values.back();
    return stats;
}

SeparationReport separation_report(const std::map<std::string, TrustScore>& scores,
                                   const std::vector<VariantPair>& pairs) {
    if (pairs.empty()) throw ValidationError("separation report needs at least one pair");
    std::vector<double> secure_values, vulnerable_values;
    SeparationReport report;
    for (const auto& pair : pairs) {
        auto secure = scores.find(pair.secure_id);
        auto vulnerable = scores.find(pair.vulnerable_id);
        if (secure == scores.end() || vulnerable == scores.end() ||
            !secure->second.defined() || !vulnerable->second.defined()) {
            ++report.excluded_pairs;
            continue;
        }
        secure_values.push_back(*secure->second.value);
        vulnerable_values.push_back(*vulnerable->second.value);
    }
    if (secure_values.empty()) {
        throw ValidationError("separation report: no pair has defined scores on both sides");
    }
    report.secure = five_number_summary("secure", secure_values);
    report.vulnerable = five_number_summary("vulnerable", vulnerable_values);
    report.test = mann_whitney_u(secure_values, vulnerable_values);
    report.iqr_overlap =
        report.secure.q1 <= report.vulnerable.q3 && report.vulnerable.q1 <= report.secure.q3;
    return report;
}

namespace {

std::string fmt(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "model,strategy,macro_acc,balanced_acc,macro_prec,macro_rec,macro_f1,excluded\n";
    for (const auto& row : rows) {
        out << row.model << ',' << row.strategy << ',' << fmt(row.metrics.accuracy) << ','
            << fmt(row.metrics.balanced_accuracy) << ',' << fmt(row.metrics.precision) << ','
            << fmt(row.metrics.recall) << ',' << fmt(row.metrics.f1) << ',' << row.excluded
            << '\n';
    }
    return out.str();
}

std::map<int, MacroMetrics> per_practice_metrics(const AssessmentRun& run,
                                                 const GroundTruthMatrix& truth) {
    std::map<int, ConfusionMatrix3> matrices;
    for (const auto& verdict : run.verdicts) {
        if (!verdict.practice_id) {
            throw ValidationError("per-practice metrics need a classification run");
        }
        ConfusionMatrix3& cm = matrices[*verdict.practice_id];
        if (verdict.parse_status == ParseStatus::Failed || !verdict.label) {
            ++cm.excluded;
            continue;
        }
        AdherenceLabel truth_label = truth.at(verdict.function_id, *verdict.practice_id);
        ++cm.counts[static_cast<std::size_t>(label_axis(truth_label))]
                   [static_cast<std::size_t>(label_axis(*verdict.label))];
    }
    std::map<int, MacroMetrics> out;
    for (const auto& [practice_id, cm] : matrices) {
        out[practice_id] = macro_metrics(cm);
    }
    return out;
}

std::string heatmap_to_csv(
    const std::map<std::string, std::map<int, MacroMetrics>>& per_model_practice_f1) {
    std::ostringstream out;
    out << "model";
    for (int p = 1; p <= kPracticeCount; ++p) out << ",p" << p;
    out << '\n';
    for (const auto& [model, by_practice] : per_model_practice_f1) {
        out << model;
        for (int p = 1; p <= kPracticeCount; ++p) {
            auto it = by_practice.find(p);
            out << ',' << (it == by_practice.end() ? "" : fmt(it->second.f1));
        }
        out << '\n';
    }
    return out.str();
}

std::string boxplot_to_csv(const std::vector<GroupStats>& groups) {
    std::ostringstream out;
    out << "group,min,q1,median,q3,max,n\n";
    for (const auto& g : groups) {
        out << g.name << ',' << fmt(g.min) << ',' << fmt(g.q1) << ',' << fmt(g.median) << ','
            << fmt(g.q3) << ',' << fmt(g.max) << ',' << g.n << '\n';
    }
    return out.str();
}

}  // namespace trustbench
