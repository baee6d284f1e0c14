#include "fdc/faults.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "fdc/errors.hpp"
#include "fdc/random.hpp"

namespace fdc::faults {

using dynamics::Channel;
using dynamics::kDegToRad;

FaultCase to_case(int id) {
    if (id < 0 || id >= static_cast<int>(kCaseCount))
        throw InvalidArgument("fault case id out of range: " + std::to_string(id));
    return static_cast<FaultCase>(id);
}

std::string_view describe(FaultCase c) {
    switch (c) {
        case FaultCase::None: return "no fault";
        case FaultCase::AirspeedDrift: return "V drift";
        case FaultCase::AlphaDrift: return "alpha drift";
        case FaultCase::AlphaNoise: return "alpha extra noise";
        case FaultCase::BetaDrift: return "beta drift";
        case FaultCase::BetaNoise: return "beta extra noise";
        case FaultCase::RateDrift: return "body rate drift";
        case FaultCase::LoadDrift: return "load factor drift";
        case FaultCase::RateNoise: return "body rate extra noise";
        case FaultCase::LoadNoise: return "load factor extra noise";
    }
    return "unknown";
}

bool is_drift(FaultCase c) noexcept {
    switch (c) {
        case FaultCase::AirspeedDrift:
        case FaultCase::AlphaDrift:
        case FaultCase::BetaDrift:
        case FaultCase::RateDrift:
        case FaultCase::LoadDrift: return true;
        default: return false;
    }
}

std::vector<Channel> affected_channels(FaultCase c) {
    switch (c) {
        case FaultCase::None: return {};
        case FaultCase::AirspeedDrift: return {Channel::V};
        case FaultCase::AlphaDrift:
        case FaultCase::AlphaNoise: return {Channel::Alpha};
        case FaultCase::BetaDrift:
        case FaultCase::BetaNoise: return {Channel::Beta};
        case FaultCase::RateDrift:
        case FaultCase::RateNoise: return {Channel::Wx, Channel::Wy, Channel::Wz};
        case FaultCase::LoadDrift:
        case FaultCase::LoadNoise: return {Channel::Gx, Channel::Gy, Channel::Gz};
    }
    return {};
}

MagnitudeRange magnitude_range(FaultCase c) {
    switch (c) {
        case FaultCase::AirspeedDrift: return {0.5, 1.0, false};
        case FaultCase::AlphaDrift:
        case FaultCase::BetaDrift: return {5.0, 10.0, true};
        case FaultCase::AlphaNoise:
        case FaultCase::BetaNoise: return {5.0, 10.0, false};
        case FaultCase::RateDrift: return {5.0, 10.0, true};
        case FaultCase::RateNoise: return {5.0, 10.0, false};
        case FaultCase::LoadDrift: return {0.1, 0.3, true};
        case FaultCase::LoadNoise: return {0.1, 0.3, false};
        case FaultCase::None: break;
    }
    throw InvalidArgument("case 0 has no fault magnitude");
}

bool FaultEvent::covers(double t) const noexcept {
    constexpr double eps = 1e-9;
    return t >= onset - eps && t <= end() + eps;
}

CaseWeights uniform_weights() {
    CaseWeights w;
    w.fill(1.0 / kCaseCount);
    return w;
}

Magnitude sample_magnitude(FaultCase c, std::uint64_t seed) {
    const MagnitudeRange range = magnitude_range(c);
    Rng rng(seed);
    std::uniform_real_distribution<double> value(range.lo, range.hi);
    Magnitude m{value(rng), 1};
    if (range.signed_) m.sign = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    if (c == FaultCase::AirspeedDrift) m.sign = -1;  // airspeed is only ever lost
    return m;
}

FaultSchedule sample_schedule(double duration, std::uint64_t seed, const CaseWeights& weights) {
    if (!(duration >= kWindowSeconds)) throw InvalidArgument("schedule duration must be >= 60 s");
    double total = 0;
    for (double w : weights) {
        if (!(w >= 0)) throw InvalidArgument("case weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("case weights must sum to 1");

    FaultSchedule schedule;
    const auto windows = static_cast<std::size_t>(std::floor(duration / kWindowSeconds + 1e-9));
    Rng rng(seed);
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    for (std::size_t w = 0; w < windows; ++w) {
        const auto c = static_cast<FaultCase>(pick(rng));
        if (c == FaultCase::None) continue;
        const double start = static_cast<double>(w) * kWindowSeconds;
        const double onset =
            start + std::uniform_real_distribution<double>(0.0, kWindowSeconds - kMinEventSeconds)(rng);
        const double remaining = start + kWindowSeconds - onset;
        // Duration in (5 s, remaining].
        const double length =
            remaining - std::uniform_real_distribution<double>(0.0, remaining - kMinEventSeconds)(rng);
        const Magnitude m = sample_magnitude(c, derive_seed(seed, 1000 + w));
        schedule.events.push_back({c, onset, std::min(length, remaining), m.value, m.sign});
    }
    return schedule;
}

namespace {

// Conversion from the customary magnitude unit to the internal channel unit.
double to_internal_units(FaultCase c) {
    switch (c) {
        case FaultCase::AlphaDrift:
        case FaultCase::AlphaNoise:
        case FaultCase::BetaDrift:
        case FaultCase::BetaNoise:
        case FaultCase::RateDrift:
        case FaultCase::RateNoise: return kDegToRad;
        default: return 1.0;
    }
}

std::string name_event(std::size_t i, const FaultEvent& e) {
    std::ostringstream os;
    os << "event #" << i << " (case " << static_cast<int>(e.fault) << ", [" << e.onset << ", " << e.end()
       << "] s)";
    return os.str();
}

}  // namespace

dynamics::SensorTrajectory apply_faults(dynamics::SensorTrajectory traj, const FaultSchedule& schedule,
                                        std::uint64_t seed) {
    if (traj.measured.size() != traj.size()) throw InvalidArgument("trajectory has no measured channels");
    traj.labels.resize(traj.size(), 0);

    std::vector<std::size_t> order(schedule.events.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return schedule.events[a].onset < schedule.events[b].onset;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
        const FaultEvent& e = schedule.events[order[k]];
        if (e.fault == FaultCase::None) throw InvalidArgument(name_event(order[k], e) + " has case 0");
        if (!(e.duration > 0)) throw InvalidArgument(name_event(order[k], e) + " has non-positive duration");
        if (e.onset < 0 || e.end() > traj.duration() + 1e-9)
            throw RangeError(name_event(order[k], e) + " exceeds the trajectory span [0, " +
                             std::to_string(traj.duration()) + "] s");
        if (k > 0 && schedule.events[order[k - 1]].end() >= e.onset)
            throw InvalidArgument(name_event(order[k], e) + " overlaps a previous event");
    }

    for (std::size_t i = 0; i < schedule.events.size(); ++i) {
        const FaultEvent& e = schedule.events[i];
        const auto channels = affected_channels(e.fault);
        const double scale = to_internal_units(e.fault);
        Rng rng(derive_seed(seed, i));
        std::normal_distribution<double> n01(0.0, 1.0);

        const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil((e.onset - 1e-9) * traj.sample_rate)));
        for (std::size_t s = first; s < traj.size() && traj.time(s) <= e.end() + 1e-9; ++s) {
            if (!e.covers(traj.time(s))) continue;
            auto& row = traj.measured[s];
            for (Channel ch : channels) {
                double& v = row[dynamics::index(ch)];
                if (e.fault == FaultCase::AirspeedDrift) {
                    v *= 1.0 - e.magnitude;
                } else if (is_drift(e.fault)) {
                    v += e.sign * e.magnitude * scale;
                } else {
                    v += e.magnitude * scale * n01(rng);
                }
            }
            traj.labels[s] = static_cast<std::uint8_t>(e.fault);
        }
    }
    return traj;
}

nlohmann::json to_json(const FaultSchedule& s) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : s.events)
        events.push_back({{"case", static_cast<int>(e.fault)},
                          {"onset_s", e.onset},
                          {"duration_s", e.duration},
                          {"magnitude", e.magnitude},
                          {"sign", e.sign}});
    return {{"window_s", s.window}, {"events", events}};
}

FaultSchedule schedule_from_json(const nlohmann::json& j) {
    try {
        FaultSchedule s;
        s.window = j.at("window_s").get<double>();
        for (const auto& e : j.at("events")) {
            FaultEvent ev;
            ev.fault = to_case(e.at("case").get<int>());
            ev.onset = e.at("onset_s").get<double>();
            ev.duration = e.at("duration_s").get<double>();
            ev.magnitude = e.at("magnitude").get<double>();
            ev.sign = e.at("sign").get<int>();
            if (ev.sign != 1 && ev.sign != -1) throw FormatError("event sign must be +1 or -1");
            s.events.push_back(ev);
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed fault schedule: ") + e.what());
    }
}

}  // namespace fdc::faults
