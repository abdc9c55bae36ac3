#pragma once

#include <chrono>
#include <cstdint>

namespace seclab {

/// Simulated time. Integer microseconds throughout.
using SimTime = std::chrono::microseconds;

constexpr SimTime seconds(std::int64_t s) { return SimTime{s * 1'000'000}; }

constexpr double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }

}  // namespace seclab
