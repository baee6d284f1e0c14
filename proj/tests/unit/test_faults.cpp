#include <array>
#include <cmath>

#include "doctest.h"

#include "fdc/errors.hpp"
#include "fdc/faults.hpp"

using namespace fdc;
using namespace fdc::faults;
using dynamics::Channel;
using dynamics::index;

namespace {

dynamics::SensorTrajectory noisy_flight(double seconds) {
    auto traj = dynamics::simulate_trajectory(dynamics::make_profile(dynamics::ProfilePreset::B2_LTO, 4), 0.05, seconds, 1);
    return dynamics::add_measurement_noise(std::move(traj), {}, 2);
}

CaseWeights only(int c) {
    CaseWeights w{};
    w[static_cast<std::size_t>(c)] = 1.0;
    return w;
}

}  // namespace

TEST_SUITE("faults") {

TEST_CASE("schedules: one event per window, inside the window") {
    CHECK(sample_schedule(600, 1, only(0)).events.empty());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = sample_schedule(600, seed, uniform_weights());
        CHECK(s.events.size() <= 10);
        std::array<int, 10> per_window{};
        for (const auto& e : s.events) {
            const auto w = static_cast<std::size_t>(std::floor(e.onset / 60.0));
            REQUIRE(w < 10);
            ++per_window[w];
            CHECK(e.duration >= kMinEventSeconds);
            CHECK(e.end() <= 60.0 * static_cast<double>(w + 1) + 1e-9);
            const auto r = magnitude_range(e.fault);
            CHECK(e.magnitude >= r.lo);
            CHECK(e.magnitude <= r.hi);
        }
        for (int n : per_window) CHECK(n <= 1);
    }
    CHECK_THROWS_AS(sample_schedule(59, 1, uniform_weights()), InvalidArgument);
    CaseWeights bad = uniform_weights();
    bad[0] += 0.5;
    CHECK_THROWS_AS(sample_schedule(600, 1, bad), InvalidArgument);
}

TEST_CASE("case frequencies follow the weights") {
    const auto s = sample_schedule(60.0 * 10000, 99, uniform_weights());
    std::array<double, 10> freq{};
    freq[0] = 10000.0 - static_cast<double>(s.events.size());
    for (const auto& e : s.events) freq[static_cast<std::size_t>(e.fault)] += 1;
    for (double f : freq) CHECK(std::abs(f / 10000.0 - 0.1) <= 0.02);
}

TEST_CASE("magnitudes lie in the tabulated ranges") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto a = sample_magnitude(FaultCase::AlphaDrift, seed);
        CHECK(a.value >= 5.0);
        CHECK(a.value <= 10.0);
        CHECK((a.sign == 1 || a.sign == -1));
        const auto n = sample_magnitude(FaultCase::LoadNoise, seed);
        CHECK(n.value >= 0.1);
        CHECK(n.value <= 0.3);
        const auto v = sample_magnitude(FaultCase::AirspeedDrift, seed);
        CHECK(v.value >= 0.5);
        CHECK(v.value <= 1.0);
    }
    int plus = 0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) plus += sample_magnitude(FaultCase::BetaDrift, seed).sign > 0;
    CHECK(plus > 150);
    CHECK(plus < 250);
    CHECK_THROWS_AS(sample_magnitude(FaultCase::None, 1), InvalidArgument);
}

TEST_CASE("empty schedule leaves the trajectory untouched") {
    const auto traj = noisy_flight(120);
    const auto out = apply_faults(traj, {}, 3);
    CHECK(out.measured == traj.measured);
    for (auto l : out.labels) CHECK(l == 0);
}

TEST_CASE("beta drift of +7 deg on [21, 31] s") {
    const auto traj = noisy_flight(60);
    FaultSchedule s;
    s.events.push_back({FaultCase::BetaDrift, 21, 10, 7.0, 1});
    const auto out = apply_faults(traj, s, 3);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.time(i);
        const bool on = t >= 21 - 1e-9 && t <= 31 + 1e-9;
        const double diff = out.measured[i][index(Channel::Beta)] - traj.measured[i][index(Channel::Beta)];
        if (on) {
            CHECK(diff == doctest::Approx(7.0 * dynamics::kDegToRad).epsilon(1e-12));
            CHECK(out.labels[i] == 4);
        } else {
            CHECK(diff == 0.0);
            CHECK(out.labels[i] == 0);
        }
        for (std::size_t c = 0; c < dynamics::kChannelCount; ++c)
            if (c != index(Channel::Beta)) CHECK(out.measured[i][c] == traj.measured[i][c]);
    }
}

TEST_CASE("airspeed drift is a multiplicative loss") {
    const auto traj = noisy_flight(60);
    FaultSchedule s;
    s.events.push_back({FaultCase::AirspeedDrift, 10, 20, 0.75, -1});
    const auto out = apply_faults(traj, s, 3);
    const std::size_t i = 400;  // t = 20 s
    CHECK(out.measured[i][index(Channel::V)] == doctest::Approx(0.25 * traj.measured[i][index(Channel::V)]).epsilon(1e-15));
}

TEST_CASE("group cases move all three channels over the same span") {
    const auto traj = noisy_flight(120);
    FaultSchedule s;
    s.events.push_back({FaultCase::RateNoise, 5, 20, 8.0, 1});
    s.events.push_back({FaultCase::LoadDrift, 70, 30, 0.2, -1});
    const auto out = apply_faults(traj, s, 3);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const bool rate = out.labels[i] == 8, load = out.labels[i] == 7;
        for (auto ch : {Channel::Wx, Channel::Wy, Channel::Wz})
            CHECK((out.measured[i][index(ch)] != traj.measured[i][index(ch)]) == rate);
        for (auto ch : {Channel::Gx, Channel::Gy, Channel::Gz}) {
            const double d = out.measured[i][index(ch)] - traj.measured[i][index(ch)];
            if (load) CHECK(d == doctest::Approx(-0.2).epsilon(1e-9));
            else CHECK(d == 0.0);
        }
    }
}

TEST_CASE("labels are nonzero exactly where an event covers the sample") {
    const auto traj = noisy_flight(600);
    const auto sched = sample_schedule(traj.duration(), 17, uniform_weights());
    const auto out = apply_faults(traj, sched, 5);
    for (std::size_t i = 0; i < out.size(); ++i) {
        bool covered = false;
        for (const auto& e : sched.events) covered = covered || e.covers(out.time(i));
        CHECK((out.labels[i] != 0) == covered);
        if (!covered) CHECK(out.measured[i] == traj.measured[i]);
    }
    CHECK(apply_faults(traj, sched, 5).measured == out.measured);
}

TEST_CASE("invalid events are rejected with their identity") {
    const auto traj = noisy_flight(60);
    FaultSchedule late;
    late.events.push_back({FaultCase::AlphaDrift, 50, 20, 6, 1});
    try {
        (void)apply_faults(traj, late, 1);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("event #0") != std::string::npos);
    }
    FaultSchedule overlap;
    overlap.events.push_back({FaultCase::AlphaDrift, 5, 20, 6, 1});
    overlap.events.push_back({FaultCase::BetaDrift, 10, 5, 6, 1});
    CHECK_THROWS_AS(apply_faults(traj, overlap, 1), InvalidArgument);
}

TEST_CASE("schedule JSON round trip") {
    const auto s = sample_schedule(600, 8, uniform_weights());
    const auto back = schedule_from_json(to_json(s));
    REQUIRE(back.events.size() == s.events.size());
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        CHECK(back.events[i].fault == s.events[i].fault);
        CHECK(back.events[i].onset == s.events[i].onset);
        CHECK(back.events[i].magnitude == s.events[i].magnitude);
    }
    CHECK_THROWS_AS(schedule_from_json(nlohmann::json{{"events", 1}}), FormatError);
}

}  // TEST_SUITE
