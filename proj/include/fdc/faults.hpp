#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdc/dynamics.hpp"

namespace fdc::faults {

inline constexpr std::size_t kCaseCount = 10;
inline constexpr double kWindowSeconds = 60.0;
inline constexpr double kMinEventSeconds = 5.0;

enum class FaultCase : std::uint8_t {
    None = 0,
    AirspeedDrift = 1,
    AlphaDrift = 2,
    AlphaNoise = 3,
    BetaDrift = 4,
    BetaNoise = 5,
    RateDrift = 6,
    LoadDrift = 7,
    RateNoise = 8,
    LoadNoise = 9,
};

FaultCase to_case(int id);
std::string_view describe(FaultCase c);
bool is_drift(FaultCase c) noexcept;
// Channels modified by a case; cases 6-9 touch a whole three-channel group.
std::vector<dynamics::Channel> affected_channels(FaultCase c);

// Magnitude range in the customary unit of the case (fraction, deg, deg/s, g).
struct MagnitudeRange {
    double lo, hi;
    bool signed_;  // +/- drift
};
MagnitudeRange magnitude_range(FaultCase c);

struct Magnitude {
    double value;  // >= 0, customary unit
    int sign;      // -1 or +1
};

struct FaultEvent {
    FaultCase fault = FaultCase::None;
    double onset = 0;     // s
    double duration = 0;  // s
    double magnitude = 0;
    int sign = 1;

    double end() const noexcept { return onset + duration; }
    bool covers(double t) const noexcept;
};

struct FaultSchedule {
    double window = kWindowSeconds;
    std::vector<FaultEvent> events;
};

using CaseWeights = std::array<double, kCaseCount>;
CaseWeights uniform_weights();

Magnitude sample_magnitude(FaultCase c, std::uint64_t seed);
FaultSchedule sample_schedule(double duration, std::uint64_t seed, const CaseWeights& weights);

dynamics::SensorTrajectory apply_faults(dynamics::SensorTrajectory traj, const FaultSchedule& schedule,
                                        std::uint64_t seed);

nlohmann::json to_json(const FaultSchedule& s);
FaultSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace fdc::faults
