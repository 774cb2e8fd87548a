#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace trustbench {

// Three-valued verdict shared by ground truth and parsed model output.
// Fixed encoding: Followed <-> "1", NotFollowed <-> "0", NotApplicable <-> "NA".
enum class AdherenceLabel {
    Followed,
    NotFollowed,
    NotApplicable,
};

inline std::string label_token(AdherenceLabel label) {
    switch (label) {
        case AdherenceLabel::Followed: return "1";
        case AdherenceLabel::NotFollowed: return "0";
        case AdherenceLabel::NotApplicable: return "NA";
    }
    return "?";
}

inline std::string label_name(AdherenceLabel label) {
    switch (label) {
        case AdherenceLabel::Followed: return "Followed";
        case AdherenceLabel::NotFollowed: return "NotFollowed";
        case AdherenceLabel::NotApplicable: return "NotApplicable";
    }
    return "?";
}

inline std::optional<AdherenceLabel> parse_label_token(std::string_view token) {
    if (token == "1") return AdherenceLabel::Followed;
    if (token == "0") return AdherenceLabel::NotFollowed;
    if (token == "NA" || token == "na") return AdherenceLabel::NotApplicable;
    return std::nullopt;
}

}  // namespace trustbench
