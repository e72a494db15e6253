#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sar {

/// The five mission-level search strategies the belief model ranks.
enum class Strategy : std::uint8_t { Trail = 0, Shelter, Waterways, Contour, Region };

inline constexpr std::size_t kStrategyCount = 5;

inline constexpr std::array<Strategy, kStrategyCount> kAllStrategies = {
    Strategy::Trail, Strategy::Shelter, Strategy::Waterways, Strategy::Contour, Strategy::Region};

/// Stable lowercase identifier ("trail", "waterways", ...). Used in files and logs.
std::string_view to_string(Strategy s) noexcept;

/// Human-facing name ("Waterways Search").
std::string_view display_name(Strategy s) noexcept;

/// Accepts ids and display names, case-insensitively ("Waterways Search", "waterways").
std::optional<Strategy> parse_strategy(std::string_view text);

/// Throws sar::Error(validation) on unknown text.
Strategy strategy_from_string(std::string_view text);

constexpr std::size_t index_of(Strategy s) noexcept { return static_cast<std::size_t>(s); }

/// Normalized probability distribution over the five strategies.
struct StrategyBelief {
    std::array<double, kStrategyCount> p{};
    double time_s = 0.0;

    double& operator[](Strategy s) noexcept { return p[index_of(s)]; }
    double operator[](Strategy s) const noexcept { return p[index_of(s)]; }

    double sum() const noexcept;
    bool is_normalized(double tol = 1e-9) const noexcept;

    /// Highest-probability strategy. Entries within 1e-9 of the maximum are
    /// tie-broken lexicographically by id.
    Strategy dominant() const noexcept;

    static StrategyBelief uniform() noexcept;
    static StrategyBelief from(const std::array<double, kStrategyCount>& values, double time_s = 0.0);
};

} // namespace sar
