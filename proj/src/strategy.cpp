#include "sarguard/strategy.hpp"

#include "sarguard/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace sar {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::inference: return "inference";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::invalid_transition: return "invalid_transition";
    case ErrorCode::version: return "version";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::io: return "io";
    }
    return "unknown";
}

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
    case Strategy::Trail: return "trail";
    case Strategy::Shelter: return "shelter";
    case Strategy::Waterways: return "waterways";
    case Strategy::Contour: return "contour";
    case Strategy::Region: return "region";
    }
    return "region";
}

std::string_view display_name(Strategy s) noexcept {
    switch (s) {
    case Strategy::Trail: return "Trail Search";
    case Strategy::Shelter: return "Shelter Search";
    case Strategy::Waterways: return "Waterways Search";
    case Strategy::Contour: return "Contour Search";
    case Strategy::Region: return "Region Search";
    }
    return "Region Search";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    while (!lowered.empty() && std::isspace(static_cast<unsigned char>(lowered.back()))) lowered.pop_back();
    std::size_t start = 0;
    while (start < lowered.size() && std::isspace(static_cast<unsigned char>(lowered[start]))) ++start;
    lowered.erase(0, start);
    constexpr std::string_view suffix = " search";
    if (lowered.size() > suffix.size() && lowered.ends_with(suffix)) lowered.resize(lowered.size() - suffix.size());
    for (Strategy s : kAllStrategies) {
        if (lowered == to_string(s)) return s;
    }
    return std::nullopt;
}

Strategy strategy_from_string(std::string_view text) {
    if (auto s = parse_strategy(text)) return *s;
    throw Error(ErrorCode::validation, "unknown strategy '" + std::string(text) + "'");
}

double StrategyBelief::sum() const noexcept {
    double total = 0.0;
    for (double v : p) total += v;
    return total;
}

bool StrategyBelief::is_normalized(double tol) const noexcept {
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
    }
    return std::abs(sum() - 1.0) <= tol;
}

Strategy StrategyBelief::dominant() const noexcept {
    double best = *std::max_element(p.begin(), p.end());
    std::optional<Strategy> pick;
    for (Strategy s : kAllStrategies) {
        if (best - (*this)[s] > 1e-9) continue;
        if (!pick || to_string(s) < to_string(*pick)) pick = s;
    }
    return *pick;
}

StrategyBelief StrategyBelief::uniform() noexcept {
    StrategyBelief b;
    b.p.fill(1.0 / static_cast<double>(kStrategyCount));
    return b;
}

StrategyBelief StrategyBelief::from(const std::array<double, kStrategyCount>& values, double time_s) {
    StrategyBelief b;
    b.p = values;
    b.time_s = time_s;
    return b;
}

} // namespace sar
