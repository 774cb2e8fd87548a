#pragma once

#include <stdexcept>
#include <string>

namespace trustbench {

// Input files that fail structural or invariant checks.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content (JSON, CSV, catalog sections).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// A rendered prompt exceeded the model's token budget.
class BudgetExceededError : public std::runtime_error {
public:
    BudgetExceededError(long budget, long measured)
        : std::runtime_error("prompt exceeds token budget: estimated " +
                             std::to_string(measured) + " tokens, budget " +
                             std::to_string(budget)),
          budget_tokens(budget),
          measured_tokens(measured) {}

    long budget_tokens;
    long measured_tokens;
};

// Replay-mode dispatch found no cache entry for the prompt.
class ReplayMissError : public std::runtime_error {
public:
    explicit ReplayMissError(const std::string& cache_key)
        : std::runtime_error("replay cache miss for key " + cache_key), key(cache_key) {}

    std::string key;
};

// HTTP transport failure after retries, or a non-success status.
class NetworkError : public std::runtime_error {
public:
    explicit NetworkError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace trustbench
