#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "trustbench/analytics.hpp"
#include "trustbench/errors.hpp"

using namespace trustbench;

namespace {

AdherenceLabel label_of(int axis) {
    return axis == 0   ? AdherenceLabel::Followed
           : axis == 1 ? AdherenceLabel::NotFollowed
                       : AdherenceLabel::NotApplicable;
}

// Build a run + truth over synthetic (function, practice) pairs.
struct Fixture {
    AssessmentRun run;
    GroundTruthMatrix truth;
};

Fixture make_fixture(const std::vector<std::pair<int, int>>& truth_pred_axes) {
    Fixture fx;
    fx.run.model_id = "m";
    fx.run.strategy = "baseline";
    fx.run.template_version = "v";
    int i = 0;
    for (const auto& [truth_axis, pred_axis] : truth_pred_axes) {
        std::string fid = "f" + std::to_string(i / 16);
        int pid = (i % 16) + 1;
        ++i;
        fx.truth.entries[{fid, pid}] = label_of(truth_axis);
        ModelVerdict v;
        v.function_id = fid;
        v.practice_id = pid;
        if (pred_axis < 0) {
            v.parse_status = ParseStatus::Failed;
        } else {
            v.label = label_of(pred_axis);
            v.parse_status = ParseStatus::Clean;
        }
        fx.run.verdicts.push_back(v);
    }
    return fx;
}

}  // namespace

TEST_CASE("confusion matrix tallies rows as truth and excludes failed parses") {
    // 2 correct Followed, 1 Followed predicted NotFollowed, 1 NA predicted
    // Followed, 1 failed parse.
    Fixture fx = make_fixture({{0, 0}, {0, 0}, {0, 1}, {2, 0}, {1, -1}});
    ConfusionMatrix3 cm = confusion(fx.run, fx.truth);
    CHECK(cm.counts[0][0] == 2);
    CHECK(cm.counts[0][1] == 1);
    CHECK(cm.counts[2][0] == 1);
    CHECK(cm.excluded == 1);
    CHECK(cm.total() == 4);
}

TEST_CASE("confusion requires exact coverage both directions") {
    Fixture fx = make_fixture({{0, 0}, {1, 1}});
    fx.truth.entries[{"extra", 1}] = AdherenceLabel::Followed;
    CHECK_THROWS_AS(confusion(fx.run, fx.truth), ValidationError);
}

TEST_CASE("perfect predictions give all metrics exactly 1") {
    Fixture fx = make_fixture({{0, 0}, {1, 1}, {2, 2}, {0, 0}, {1, 1}});
    MacroMetrics m = macro_metrics(confusion(fx.run, fx.truth));
    CHECK(m.accuracy == 1.0);
    CHECK(m.balanced_accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.absent_classes == 0);
}

TEST_CASE("absent classes stay in the macro denominator") {
    // Only Followed examples, all correct: per-class scores are 1,0,0.
    Fixture fx = make_fixture({{0, 0}, {0, 0}, {0, 0}});
    MacroMetrics m = macro_metrics(confusion(fx.run, fx.truth));
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(m.absent_classes == 2);
}

TEST_CASE("metrics match an independent tally oracle on random fixtures") {
    std::mt19937_64 rng(424242);
    std::uniform_int_distribution<int> axis_die(0, 2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<int, int>> pairs;
        long tally[3][3] = {};
        for (int i = 0; i < 200; ++i) {
            int t = axis_die(rng), p = axis_die(rng);
            pairs.push_back({t, p});
            ++tally[t][p];
        }
        Fixture fx = make_fixture(pairs);
        ConfusionMatrix3 cm = confusion(fx.run, fx.truth);
        for (int t = 0; t < 3; ++t) {
            for (int p = 0; p < 3; ++p) CHECK(cm.counts[t][p] == tally[t][p]);
        }

        // Formula oracle, written independently of the implementation.
        double prec_sum = 0, rec_sum = 0, f1_sum = 0;
        long correct = 0;
        for (int c = 0; c < 3; ++c) {
            long tp = tally[c][c], col = 0, row = 0;
            for (int o = 0; o < 3; ++o) {
                col += tally[o][c];
                row += tally[c][o];
            }
            correct += tp;
            double prec = col == 0 ? 0.0 : double(tp) / col;
            double rec = row == 0 ? 0.0 : double(tp) / row;
            prec_sum += prec;
            rec_sum += rec;
            f1_sum += (prec + rec) == 0 ? 0.0 : 2 * prec * rec / (prec + rec);
        }
        MacroMetrics m = macro_metrics(cm);
        CHECK(m.accuracy == doctest::Approx(correct / 200.0).epsilon(1e-12));
        CHECK(m.precision == doctest::Approx(prec_sum / 3).epsilon(1e-12));
        CHECK(m.recall == doctest::Approx(rec_sum / 3).epsilon(1e-12));
        CHECK(m.f1 == doctest::Approx(f1_sum / 3).epsilon(1e-12));
        CHECK(m.balanced_accuracy == doctest::Approx(rec_sum / 3).epsilon(1e-12));
    }
}

TEST_CASE("mae basics") {
    std::map<std::string, double> a = {{"x", 0.2}, {"y", 0.8}};
    CHECK(mae(a, a) == 0.0);
    std::map<std::string, double> b = {{"x", 0.4}, {"y", 0.6}};
    CHECK(mae(a, b) == doctest::Approx(0.2).epsilon(1e-12));
    std::map<std::string, double> disjoint = {{"z", 0.5}};
    CHECK_THROWS_AS(mae(a, disjoint), ValidationError);

    CHECK(mae_in_expected_band(0.40));
    CHECK(mae_in_expected_band(0.60));
    CHECK_FALSE(mae_in_expected_band(0.39));
    CHECK_FALSE(mae_in_expected_band(0.61));
}

TEST_CASE("Mann-Whitney exact p for {1,2,3} vs {4,5,6} is 0.1") {
    MannWhitneyResult r = mann_whitney_u({1, 2, 3}, {4, 5, 6});
    CHECK(r.method == MannWhitneyMethod::Exact);
    CHECK(r.u_statistic == 0.0);
    // Enumeration: P(U <= 0) = 1/C(6,3) = 1/20; two-sided doubles it.
    CHECK(r.p_value == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("Mann-Whitney sample swap flips U to n1*n2 - U") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size_die(2, 8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(size_die(rng)), b(size_die(rng));
        for (auto& x : a) x = value(rng);
        for (auto& x : b) x = value(rng);
        MannWhitneyResult fwd = mann_whitney_u(a, b);
        MannWhitneyResult rev = mann_whitney_u(b, a);
        CHECK(fwd.u_statistic + rev.u_statistic ==
              doctest::Approx(double(a.size() * b.size())).epsilon(1e-12));
        CHECK(fwd.p_value == doctest::Approx(rev.p_value).epsilon(1e-9));
    }
}

TEST_CASE("exact and normal approximation agree on tie-free samples") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size_die(5, 10);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(size_die(rng)), b(size_die(rng));
        for (auto& x : a) x = value(rng);
        for (auto& x : b) x = value(rng);
        MannWhitneyResult exact = mann_whitney_u(a, b, 20);
        MannWhitneyResult approx = mann_whitney_u(a, b, 0);  // force normal path
        REQUIRE(exact.method == MannWhitneyMethod::Exact);
        REQUIRE(approx.method == MannWhitneyMethod::NormalApprox);
        CHECK(std::abs(exact.p_value - approx.p_value) < 0.02);
    }
}

TEST_CASE("degenerate all-equal samples have p = 1") {
    MannWhitneyResult r = mann_whitney_u({0.5, 0.5}, {0.5, 0.5, 0.5});
    CHECK(r.degenerate);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("five-number summary uses linear interpolation") {
    GroupStats g = five_number_summary("g", {1, 2, 3, 4});
    CHECK(g.n == 4);
    CHECK(g.min == 1.0);
    CHECK(g.q1 == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(g.median == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(g.q3 == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(g.max == 4.0);

    GroupStats single = five_number_summary("s", {0.3});
    CHECK(single.min == 0.3);
    CHECK(single.median == 0.3);
    CHECK(single.max == 0.3);
}

TEST_CASE("separation report splits pairs and flags IQR overlap") {
    std::map<std::string, TrustScore> scores;
    std::vector<VariantPair> pairs;
    for (int i = 0; i < 6; ++i) {
        std::string secure = "s" + std::to_string(i), vuln = "v" + std::to_string(i);
        TrustScore hi;
        hi.function_id = secure;
        hi.value = 0.9 + 0.01 * i;
        TrustScore lo;
        lo.function_id = vuln;
        lo.value = 0.01 + 0.001 * i;
        scores[secure] = hi;
        scores[vuln] = lo;
        pairs.push_back({secure, vuln});
    }
    SeparationReport report = separation_report(scores, pairs);
    CHECK(report.secure.n == 6);
    CHECK(report.vulnerable.n == 6);
    CHECK(report.secure.median > report.vulnerable.median);
    CHECK_FALSE(report.iqr_overlap);
    CHECK(report.excluded_pairs == 0);
    CHECK(report.test.p_value < 0.05);

    SUBCASE("undefined member excludes the pair") {
        scores["s0"].value.reset();
        SeparationReport partial = separation_report(scores, pairs);
        CHECK(partial.excluded_pairs == 1);
        CHECK(partial.secure.n == 5);
    }
}

TEST_CASE("csv exports carry stable headers") {
    Fixture fx = make_fixture({{0, 0}, {1, 1}});
    MacroMetrics m = macro_metrics(confusion(fx.run, fx.truth));
    std::string metrics = metrics_to_csv({{"m", "baseline", m, 0}});
    CHECK(metrics.rfind("model,strategy,macro_acc,balanced_acc,macro_prec,macro_rec,macro_f1,"
                        "excluded\n", 0) == 0);

    std::string boxes = boxplot_to_csv({five_number_summary("g", {1, 2, 3})});
    CHECK(boxes.rfind("group,min,q1,median,q3,max,n\n", 0) == 0);

    auto per_practice = per_practice_metrics(fx.run, fx.truth);
    std::string heat = heatmap_to_csv({{"m/baseline", per_practice}});
    CHECK(heat.rfind("model,p1,p2,", 0) == 0);
}
