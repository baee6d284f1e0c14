#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdc::dynamics {

inline constexpr double kGravity = 9.80665;  // m/s^2, load factors are stored in multiples of this
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kSingularityTolerance = 1e-6;
// Generated states must keep |theta| and |beta| below pi/2 - kAngleMargin.
inline constexpr double kAngleMargin = 1e-3;

inline constexpr std::size_t kChannelCount = 15;

// Channel order of every trajectory sample and of the SDI rows.
enum class Channel : std::size_t {
    V, Alpha, Beta, Gx, Gy, Gz, Wx, Wy, Wz, Psi, Theta, Phi, X, Y, Z
};

constexpr std::size_t index(Channel c) noexcept { return static_cast<std::size_t>(c); }

const std::array<std::string_view, kChannelCount>& channel_names();

// Angles in rad, rates in rad/s, airspeed in m/s, position in m.
struct AircraftState {
    double V = 0, alpha = 0, beta = 0;
    double psi = 0, theta = 0, phi = 0;
    double wx = 0, wy = 0, wz = 0;
    double x = 0, y = 0, z = 0;
};

// Specific-force components in g.
struct LoadFactors {
    double gx = 0, gy = 0, gz = 0;
};

// Additive rate terms entering the alpha/beta equations, rad/s.
struct WindRates {
    double wx = 0, wy = 0, wz = 0;
};

struct StateDerivative {
    double V = 0, alpha = 0, beta = 0;
    double psi = 0, theta = 0, phi = 0;
    double x = 0, y = 0, z = 0;
};

struct BodyVelocity {
    double u = 0, v = 0, w = 0;
};

// Air-data, attitude and position rates for the given state. Body rates in
// the attitude kinematics come from the state; the additive wx/wy/wz terms of
// the alpha/beta equations come from `wind`. Throws SingularityError.
StateDerivative state_derivative(const AircraftState& s, const LoadFactors& g, const WindRates& wind);

BodyVelocity body_velocity(double V, double alpha, double beta) noexcept;

// ---------------------------------------------------------------------------
// Maneuver profiles

enum class ProfilePreset {
    Level,      // trimmed straight and level, no turbulence
    Y_LTO,      // cargo airplane, low altitude landing/take-off, manual
    B1_Cruise,  // large airliner, high altitude cruise, autopilot
    B1_Free,    // large airliner, low altitude free flight, manual
    B2_LTO,     // twin-jet airliner, low altitude LTO, manual
    D_Cruise,   // general aviation, high altitude cruise, autopilot
};

std::string_view to_string(ProfilePreset p);
ProfilePreset parse_profile_preset(std::string_view name);
std::span<const ProfilePreset> flight_condition_presets();

// Sum of up to three sinusoids around an offset.
struct CommandSignal {
    double offset = 0;
    std::array<double, 3> amplitude{};
    std::array<double, 3> omega{};  // rad/s
    std::array<double, 3> phase{};

    double value(double t) const noexcept;
    double rate(double t) const noexcept;
};

struct ProfileInputs {
    LoadFactors load;
    double wx = 0, wy = 0, wz = 0;  // body rates, rad/s
};

// Commanded airspeed/flow-angle/attitude histories plus the turbulence
// environment. Body rates invert the attitude kinematics so attitudes track
// their commands; load factors are solved from the air-data equations so
// V, alpha and beta track theirs.
struct ManeuverProfile {
    std::string name = "level";
    CommandSignal airspeed;  // m/s
    CommandSignal alpha, beta, theta, phi;  // rad
    CommandSignal yaw_rate;  // rad/s
    double tracking_gain = 0.5;  // 1/s
    double initial_psi = 0;
    double altitude = 1000;  // m, z = -altitude
    double turbulence_intensity = 0;  // m/s
    double turbulence_timescale = 1;  // s

    ProfileInputs inputs(double t, const AircraftState& s) const;
    AircraftState initial_state() const;
};

ManeuverProfile make_profile(ProfilePreset preset, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Trajectories

using ChannelVector = std::array<double, kChannelCount>;

ChannelVector to_channels(const AircraftState& s, const LoadFactors& g) noexcept;

struct SensorTrajectory {
    double sample_rate = 0;  // Hz, sample i is at time i / sample_rate
    std::vector<ChannelVector> clean;
    std::vector<ChannelVector> measured;
    std::vector<std::uint8_t> labels;  // fault case id per sample

    std::size_t size() const noexcept { return clean.size(); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) / sample_rate; }
    double duration() const noexcept { return size() ? time(size() - 1) : 0.0; }
};

// Gauss-Markov gust surrogate: w[k+1] = w[k] e^{-dt/T} + s sqrt(1 - e^{-2dt/T}) xi.
// Values carry the unit of `intensity`, which is the stationary std per axis.
std::vector<WindRates> dryden_disturbance(std::uint64_t seed, double dt, std::size_t n,
                                          double intensity, double timescale);

// RK4 integration of state_derivative at step dt; turbulence from the
// profile enters the wind terms with a zero-order hold per step.
SensorTrajectory simulate_trajectory(const ManeuverProfile& profile, double dt, double duration,
                                     std::uint64_t seed);

// Standard deviations in the sensor's customary units.
struct NoiseSpec {
    double airspeed_mps = 0.1;
    double flow_angle_deg = 0.1;
    double load_factor_g = 0.01;
    double body_rate_dps = 0.01;
    double attitude_deg = 0.01;
    double position_m = 1.0;

    static NoiseSpec zero() { return {0, 0, 0, 0, 0, 0}; }
    // Per-channel sigma in internal units (rad, rad/s, g, m/s, m).
    ChannelVector sigma() const;
};

SensorTrajectory add_measurement_noise(SensorTrajectory traj, const NoiseSpec& spec,
                                       std::uint64_t seed);

// "FDCT" container.
std::vector<std::uint8_t> serialize(const SensorTrajectory& traj);
SensorTrajectory deserialize_trajectory(std::span<const std::uint8_t> bytes);
void save_trajectory(const SensorTrajectory& traj, const std::string& path);
SensorTrajectory load_trajectory(const std::string& path);

}  // namespace fdc::dynamics
