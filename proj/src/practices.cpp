#include "trustbench/practices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "trustbench/errors.hpp"

namespace trustbench {

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::size_t count_lines(const std::string& text) {
    if (text.empty()) return 0;
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) +
           (text.back() == '\n' ? 0 : 1);
}

void validate_practice(const Practice& p) {
    if (p.practice_id < 1 || p.practice_id > kPracticeCount) {
        throw ValidationError("practice_id " + std::to_string(p.practice_id) + " outside 1..16");
    }
    if (p.title.empty()) {
        throw ValidationError("practice " + std::to_string(p.practice_id) + ": empty title");
    }
    if (p.description.empty()) {
        throw ValidationError("practice " + std::to_string(p.practice_id) + ": empty description");
    }
    if (trim(p.rule_instructions.followed).empty()) {
        throw ValidationError("practice " + std::to_string(p.practice_id) +
                              ": missing Followed rule clause");
    }
    if (trim(p.rule_instructions.not_followed).empty()) {
        throw ValidationError("practice " + std::to_string(p.practice_id) +
                              ": missing NotFollowed rule clause");
    }
    if (p.cve_count < 0) {
        throw ValidationError("practice " + std::to_string(p.practice_id) +
                              ": negative cve_count");
    }
    for (const auto& snippet : p.bad_examples) {
        std::size_t lines = count_lines(snippet);
        if (lines < 1 || lines > 10) {
            throw ValidationError("practice " + std::to_string(p.practice_id) +
                                  ": bad example has " + std::to_string(lines) +
                                  " lines, expected 1..10");
        }
    }
}

}  // namespace

Catalog::Catalog(std::vector<Practice> practices) : practices_(std::move(practices)) {
    std::sort(practices_.begin(), practices_.end(),
              [](const Practice& a, const Practice& b) { return a.practice_id < b.practice_id; });
    if (practices_.size() != kPracticeCount) {
        throw ValidationError("catalog has " + std::to_string(practices_.size()) +
                              " practices, expected 16");
    }
    for (int i = 0; i < kPracticeCount; ++i) {
        if (practices_[static_cast<std::size_t>(i)].practice_id != i + 1) {
            throw ValidationError("catalog missing practice " + std::to_string(i + 1));
        }
        validate_practice(practices_[static_cast<std::size_t>(i)]);
    }
}

const Practice& Catalog::at(int practice_id) const {
    if (practice_id < 1 || practice_id > kPracticeCount) {
        throw ValidationError("practice_id " + std::to_string(practice_id) + " outside 1..16");
    }
    return practices_[static_cast<std::size_t>(practice_id - 1)];
}

Catalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open catalog file: " + path.string());

    std::vector<Practice> practices;
    Practice* current = nullptr;
    std::string line;
    std::size_t lineno = 0;

    auto fail = [&](const std::string& msg) -> ParseError {
        return ParseError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;

        if (t.front() == '[') {
            if (t.back() != ']') throw fail("unterminated section header");
            std::istringstream hdr(t.substr(1, t.size() - 2));
            std::string word;
            int id = 0;
            hdr >> word >> id;
            if (word != "practice" || id == 0) throw fail("expected [practice N]");
            for (const auto& p : practices) {
                if (p.practice_id == id) {
                    throw fail("duplicate section for practice " + std::to_string(id));
                }
            }
            practices.emplace_back();
            current = &practices.back();
            current->practice_id = id;
            continue;
        }
        if (!current) throw fail("key outside of a [practice N] section");

        // Two value forms: `key = value` and heredoc `key <<TAG ... TAG`.
        std::string key, value;
        auto heredoc = t.find("<<");
        auto equals = t.find('=');
        if (heredoc != std::string::npos && (equals == std::string::npos || heredoc < equals)) {
            key = trim(t.substr(0, heredoc));
            std::string tag = trim(t.substr(heredoc + 2));
            if (tag.empty()) throw fail("heredoc tag missing");
            std::ostringstream body;
            bool closed = false;
            while (std::getline(in, line)) {
                ++lineno;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (trim(line) == tag) {
                    closed = true;
                    break;
                }
                body << line << '\n';
            }
            if (!closed) throw fail("unterminated heredoc for key '" + key + "'");
            value = body.str();
            if (!value.empty() && value.back() == '\n') value.pop_back();
        } else if (equals != std::string::npos) {
            key = trim(t.substr(0, equals));
            value = trim(t.substr(equals + 1));
        } else {
            throw fail("expected `key = value` or `key <<TAG`");
        }

        if (key == "title") {
            current->title = value;
        } else if (key == "description") {
            current->description = value;
        } else if (key == "cwe") {
            std::istringstream list(value);
            std::string item;
            while (std::getline(list, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                try {
                    int cwe = std::stoi(item);
                    if (cwe <= 0) throw fail("non-positive CWE id");
                    current->cwe_ids.push_back(cwe);
                } catch (const ParseError&) {
                    throw;
                } catch (const std::exception&) {
                    throw fail("bad CWE id '" + item + "'");
                }
            }
        } else if (key == "cve_count") {
            try {
                current->cve_count = std::stol(value);
            } catch (const std::exception&) {
                throw fail("bad cve_count '" + value + "'");
            }
        } else if (key == "bad_example") {
            current->bad_examples.push_back(value);
        } else if (key == "followed") {
            current->rule_instructions.followed = value;
        } else if (key == "not_followed") {
            current->rule_instructions.not_followed = value;
        } else {
            throw fail("unknown key '" + key + "'");
        }
    }
    return Catalog(std::move(practices));
}

void WeightVector::validate() const {
    double sum = 0.0;
    for (const auto& [id, w] : weights) {
        if (w <= 0.0 || w > 1.0) {
            throw ValidationError("weight for practice " + std::to_string(id) +
                                  " outside (0,1]: " + std::to_string(w));
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ValidationError("weights sum to " + std::to_string(sum) + ", expected 1");
    }
}

WeightVector uniform_weights(const Catalog& catalog) {
    WeightVector wv;
    const double w = 1.0 / static_cast<double>(catalog.practices().size());
    for (const auto& p : catalog.practices()) wv.weights[p.practice_id] = w;
    return wv;
}

std::map<int, long> load_cve_counts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CVE counts file: " + path.string());
    std::map<int, long> counts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line == "practice_id,count") continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        try {
            int id = std::stoi(line.substr(0, comma));
            long count = std::stol(line.substr(comma + 1));
            if (count < 0) {
                throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                      ": negative count");
            }
            if (!counts.emplace(id, count).second) {
                throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                      ": duplicate practice_id");
            }
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
    }
    return counts;
}

WeightVector derive_weights(const std::map<int, long>& cve_counts) {
    if (cve_counts.empty()) throw ValidationError("no CVE counts given");
    long total = 0;
    // Floor rule: a zero count becomes 1 so the practice keeps positive weight.
    std::map<int, long> floored = cve_counts;
    for (auto& [id, count] : floored) {
        (void)id;
        if (count == 0) count = 1;
        total += count;
    }
    WeightVector wv;
    for (const auto& [id, count] : floored) {
        wv.weights[id] = static_cast<double>(count) / static_cast<double>(total);
    }
    wv.validate();
    return wv;
}

WeightVector redistribute_for_na(const WeightVector& weights,
                                 const std::map<int, AdherenceLabel>& labels) {
    double surviving = 0.0;
    for (const auto& [id, w] : weights.weights) {
        auto it = labels.find(id);
        bool na = it != labels.end() && it->second == AdherenceLabel::NotApplicable;
        if (!na) surviving += w;
    }
    if (surviving <= 0.0) {
        throw ValidationError("all practices NotApplicable: no weight to redistribute");
    }
    WeightVector out;
    for (const auto& [id, w] : weights.weights) {
        auto it = labels.find(id);
        bool na = it != labels.end() && it->second == AdherenceLabel::NotApplicable;
        if (!na) out.weights[id] = w / surviving;
    }
    return out;
}

std::string weights_to_csv(const WeightVector& weights) {
    std::ostringstream out;
    out << "practice_id,weight\n";
    char buf[32];
    for (const auto& [id, w] : weights.weights) {
        std::snprintf(buf, sizeof(buf), "%.12f", w);
        out << id << ',' << buf << '\n';
    }
    return out.str();
}

}  // namespace trustbench
