#pragma once

#include "sarguard/error.hpp"
#include "sarguard/strategy.hpp"

#include <doctest.h>

#include <array>
#include <optional>
#include <string>

namespace sar::testing {

/// Runs `f` and returns the sar::Error code it threw, or nullopt if it returned.
template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

/// Table values listed in the order trail, shelter, waterways, contour, region.
inline StrategyBelief belief_of(double trail, double shelter, double waterways, double contour, double region) {
    return StrategyBelief::from({trail, shelter, waterways, contour, region});
}

/// The low-entropy table: Region .65, Waterways .12, Trail .10, Shelter .08, Contour .05.
inline StrategyBelief low_entropy_table() { return belief_of(0.10, 0.08, 0.12, 0.05, 0.65); }
/// The high-entropy table: Region .23, Waterways .22, Trail .22, Shelter .21, Contour .12.
inline StrategyBelief high_entropy_table() { return belief_of(0.22, 0.21, 0.22, 0.12, 0.23); }

inline std::string fixture_path(const std::string& relative) { return std::string(SAR_TEST_FIXTURES) + "/" + relative; }

} // namespace sar::testing

#define CHECK_ERROR_CODE(expr, code_value) \
    CHECK(::sar::testing::error_code_of([&] { (void)(expr); }) == std::optional<::sar::ErrorCode>(code_value))
