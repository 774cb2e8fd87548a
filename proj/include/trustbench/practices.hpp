#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "trustbench/adherence.hpp"
#include "trustbench/corpus.hpp"

namespace trustbench {

struct RuleInstructions {
    std::string followed;      // condition under which the rule counts as followed
    std::string not_followed;  // condition under which it counts as not followed
};

struct Practice {
    int practice_id = 0;  // 1..16
    std::string title;
    std::string description;
    std::vector<int> cwe_ids;
    std::vector<std::string> bad_examples;  // short code snippets, 1..10 lines each
    RuleInstructions rule_instructions;
    long cve_count = 0;
};

// All 16 OWASP Input Validation practices; immutable after load.
class Catalog {
public:
    explicit Catalog(std::vector<Practice> practices);

    const std::vector<Practice>& practices() const { return practices_; }
    const Practice& at(int practice_id) const;

private:
    std::vector<Practice> practices_;  // sorted by practice_id
};

struct WeightVector {
    std::map<int, double> weights;  // practice_id -> w_i, each > 0, sum == 1

    void validate() const;  // throws ValidationError on violation
};

// Sectioned text format; see data/catalog/input_validation.cat for the shipped
// default and README for the grammar.
Catalog load_catalog(const std::filesystem::path& path);

WeightVector uniform_weights(const Catalog& catalog);

// CSV `practice_id,count`.
std::map<int, long> load_cve_counts(const std::filesystem::path& path);

// w_i proportional to count_i; zero counts get a floor count of 1 before
// normalization so every practice keeps positive weight.
WeightVector derive_weights(const std::map<int, long>& cve_counts);

// Drop NA practices and rescale the survivors so they sum to 1.
// Throws ValidationError when every label is NotApplicable.
WeightVector redistribute_for_na(const WeightVector& weights,
                                 const std::map<int, AdherenceLabel>& labels);

// CSV `practice_id,weight` with 12 decimal places.
std::string weights_to_csv(const WeightVector& weights);

}  // namespace trustbench
