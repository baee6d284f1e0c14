#include "fdc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"
#include "fdc/random.hpp"

namespace fdc::dynamics {

const std::array<std::string_view, kChannelCount>& channel_names() {
    static constexpr std::array<std::string_view, kChannelCount> names{
        "V", "alpha", "beta", "Gx", "Gy", "Gz", "wx", "wy", "wz",
        "psi", "theta", "phi", "x", "y", "z"};
    return names;
}

StateDerivative state_derivative(const AircraftState& s, const LoadFactors& load, const WindRates& wind) {
    const double ct = std::cos(s.theta);
    const double cb = std::cos(s.beta);
    if (std::abs(ct) < kSingularityTolerance) throw SingularityError("cos(theta) ~ 0", NAN);
    if (std::abs(cb) < kSingularityTolerance) throw SingularityError("cos(beta) ~ 0", NAN);
    if (s.V < kSingularityTolerance) throw SingularityError("airspeed ~ 0", NAN);

    const double g = kGravity;
    const double gx = load.gx * g, gy = load.gy * g, gz = load.gz * g;
    const double sa = std::sin(s.alpha), ca = std::cos(s.alpha);
    const double sb = std::sin(s.beta);
    const double st = std::sin(s.theta);
    const double sf = std::sin(s.phi), cf = std::cos(s.phi);
    const double sp = std::sin(s.psi), cp = std::cos(s.psi);

    const double fx = gx - g * st;       // axial specific force incl. gravity
    const double fy = gy + g * sf * ct;  // lateral
    const double fz = gz + g * cf * ct;  // normal

    StateDerivative d;
    d.V = fx * ca * cb + fy * sb + fz * sa * cb;
    d.alpha = (-gx * sa + gz * ca + g * cf * ct * ca + g * st * sa) / (s.V * cb) + wind.wy -
              (wind.wx * ca + wind.wz * sa) * sb / cb;
    d.beta = (-fx * ca * sb + fy * cb - fz * sa * sb) / s.V + wind.wx * sa - wind.wz * ca;

    d.psi = s.wy * sf / ct + s.wz * cf / ct;
    d.theta = s.wy * cf - s.wz * sf;
    d.phi = s.wx + s.wy * sf * st / ct + s.wz * cf * st / ct;

    const auto [u, v, w] = body_velocity(s.V, s.alpha, s.beta);
    d.x = u * ct * cp + v * (st * sf * cp - cf * sp) + w * (st * cf * cp + sf * sp);
    d.y = u * ct * sp + v * (st * sf * sp + cf * cp) + w * (st * cf * sp - sf * cp);
    d.z = -u * st + v * sf * ct + w * cf * ct;
    return d;
}

BodyVelocity body_velocity(double V, double alpha, double beta) noexcept {
    const double cb = std::cos(beta);
    return {V * std::cos(alpha) * cb, V * std::sin(beta), V * std::sin(alpha) * cb};
}

// ---------------------------------------------------------------------------

double CommandSignal::value(double t) const noexcept {
    double v = offset;
    for (std::size_t i = 0; i < amplitude.size(); ++i) v += amplitude[i] * std::sin(omega[i] * t + phase[i]);
    return v;
}

double CommandSignal::rate(double t) const noexcept {
    double r = 0;
    for (std::size_t i = 0; i < amplitude.size(); ++i)
        r += amplitude[i] * omega[i] * std::cos(omega[i] * t + phase[i]);
    return r;
}

ProfileInputs ManeuverProfile::inputs(double t, const AircraftState& s) const {
    const double k = tracking_gain;
    ProfileInputs in;

    // Attitude kinematics inverted for the body rates.
    const double phi_dot = phi.rate(t) + k * (phi.value(t) - s.phi);
    const double theta_dot = theta.rate(t) + k * (theta.value(t) - s.theta);
    const double psi_dot = yaw_rate.value(t);
    const double sf = std::sin(s.phi), cf = std::cos(s.phi);
    const double st = std::sin(s.theta), ct = std::cos(s.theta);
    in.wx = phi_dot - psi_dot * st;
    in.wy = theta_dot * cf + psi_dot * ct * sf;
    in.wz = -theta_dot * sf + psi_dot * ct * cf;

    // The air-data equations are linear in the load factors through an
    // orthonormal body-to-wind rotation; solve for the ones that realize the
    // desired V, alpha, beta rates.
    AircraftState with_rates = s;
    with_rates.wx = in.wx;
    with_rates.wy = in.wy;
    with_rates.wz = in.wz;
    const StateDerivative free = state_derivative(with_rates, {}, {});
    const double v_dot = airspeed.rate(t) + k * (airspeed.value(t) - s.V);
    const double a_dot = alpha.rate(t) + k * (alpha.value(t) - s.alpha);
    const double b_dot = beta.rate(t) + k * (beta.value(t) - s.beta);

    const double sa = std::sin(s.alpha), ca = std::cos(s.alpha);
    const double sb = std::sin(s.beta), cb = std::cos(s.beta);
    const double r1 = v_dot - free.V;
    const double r2 = (a_dot - free.alpha) * s.V * cb;
    const double r3 = (b_dot - free.beta) * s.V;
    in.load.gx = (r1 * ca * cb - r2 * sa - r3 * ca * sb) / kGravity;
    in.load.gy = (r1 * sb + r3 * cb) / kGravity;
    in.load.gz = (r1 * sa * cb + r2 * ca - r3 * sa * sb) / kGravity;
    return in;
}

AircraftState ManeuverProfile::initial_state() const {
    AircraftState s;
    s.V = airspeed.value(0);
    s.alpha = alpha.value(0);
    s.beta = beta.value(0);
    s.theta = theta.value(0);
    s.phi = phi.value(0);
    s.psi = initial_psi;
    s.z = -altitude;
    return s;
}

std::string_view to_string(ProfilePreset p) {
    switch (p) {
        case ProfilePreset::Level: return "level";
        case ProfilePreset::Y_LTO: return "Y_LTO";
        case ProfilePreset::B1_Cruise: return "B1_cruise";
        case ProfilePreset::B1_Free: return "B1_free";
        case ProfilePreset::B2_LTO: return "B2_LTO";
        case ProfilePreset::D_Cruise: return "D_cruise";
    }
    return "unknown";
}

ProfilePreset parse_profile_preset(std::string_view name) {
    for (auto p : {ProfilePreset::Level, ProfilePreset::Y_LTO, ProfilePreset::B1_Cruise,
                   ProfilePreset::B1_Free, ProfilePreset::B2_LTO, ProfilePreset::D_Cruise})
        if (to_string(p) == name) return p;
    throw InvalidArgument("unknown profile preset: " + std::string(name));
}

std::span<const ProfilePreset> flight_condition_presets() {
    static constexpr std::array presets{ProfilePreset::Y_LTO, ProfilePreset::B1_Cruise,
                                        ProfilePreset::B1_Free, ProfilePreset::B2_LTO,
                                        ProfilePreset::D_Cruise};
    return presets;
}

namespace {

struct Envelope {
    double airspeed, airspeed_amp;
    double alpha_deg, alpha_amp_deg;
    double beta_amp_deg;
    double theta_amp_deg, phi_amp_deg;
    double yaw_rate_dps;
    double altitude;
    double turbulence, timescale;
    bool manual;  // manual flight uses shorter, more irregular periods
};

Envelope envelope_for(ProfilePreset p) {
    switch (p) {
        case ProfilePreset::Y_LTO: return {70, 10, 4, 3, 2.0, 8, 20, 1.5, 500, 1.5, 1.5, true};
        case ProfilePreset::B1_Cruise: return {230, 4, 2.5, 0.6, 0.3, 1.5, 5, 0.3, 10000, 0.5, 3.0, false};
        case ProfilePreset::B1_Free: return {130, 12, 5, 2, 1.5, 6, 25, 2.0, 1500, 1.2, 2.0, true};
        case ProfilePreset::B2_LTO: return {75, 9, 5, 3, 2.0, 7, 18, 1.5, 400, 1.8, 1.5, true};
        case ProfilePreset::D_Cruise: return {80, 3, 3, 1, 0.5, 2, 6, 0.5, 4000, 0.7, 2.5, false};
        case ProfilePreset::Level: break;
    }
    return {100, 0, 0, 0, 0, 0, 0, 0, 1000, 0, 1, false};
}

}  // namespace

ManeuverProfile make_profile(ProfilePreset preset, std::uint64_t seed) {
    const Envelope e = envelope_for(preset);
    ManeuverProfile p;
    p.name = std::string(to_string(preset));
    p.airspeed.offset = e.airspeed;
    p.alpha.offset = e.alpha_deg * kDegToRad;
    p.altitude = e.altitude;
    p.turbulence_intensity = e.turbulence;
    p.turbulence_timescale = e.timescale;
    if (preset == ProfilePreset::Level) return p;

    Rng rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> jitter(0.75, 1.3);
    const std::array<double, 3> periods = e.manual ? std::array{9.0, 23.0, 47.0}
                                                   : std::array{31.0, 67.0, 131.0};
    const std::array<double, 3> weights{0.5, 0.3, 0.2};

    auto fill = [&](CommandSignal& sig, double amplitude) {
        for (std::size_t i = 0; i < 3; ++i) {
            sig.amplitude[i] = amplitude * weights[i] * jitter(rng);
            sig.omega[i] = 2.0 * kPi / (periods[i] * jitter(rng));
            sig.phase[i] = phase(rng);
        }
    };
    fill(p.airspeed, e.airspeed_amp);
    fill(p.alpha, e.alpha_amp_deg * kDegToRad);
    fill(p.beta, e.beta_amp_deg * kDegToRad);
    fill(p.theta, e.theta_amp_deg * kDegToRad);
    fill(p.phi, e.phi_amp_deg * kDegToRad);
    fill(p.yaw_rate, e.yaw_rate_dps * kDegToRad);
    p.initial_psi = phase(rng) - kPi;
    p.altitude *= jitter(rng);
    return p;
}

// ---------------------------------------------------------------------------

ChannelVector to_channels(const AircraftState& s, const LoadFactors& g) noexcept {
    return {s.V, s.alpha, s.beta, g.gx, g.gy, g.gz, s.wx, s.wy, s.wz,
            s.psi, s.theta, s.phi, s.x, s.y, s.z};
}

std::vector<WindRates> dryden_disturbance(std::uint64_t seed, double dt, std::size_t n,
                                          double intensity, double timescale) {
    if (intensity < 0) throw InvalidArgument("turbulence intensity must be >= 0");
    if (!(timescale > 0)) throw InvalidArgument("turbulence timescale must be > 0");
    std::vector<WindRates> out(n);
    if (intensity == 0 || n == 0) return out;

    Rng rng(seed);
    std::normal_distribution<double> xi(0.0, 1.0);
    const double decay = std::exp(-dt / timescale);
    const double drive = intensity * std::sqrt(1.0 - decay * decay);
    // Start from the stationary distribution.
    WindRates w{intensity * xi(rng), intensity * xi(rng), intensity * xi(rng)};
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = w;
        w.wx = w.wx * decay + drive * xi(rng);
        w.wy = w.wy * decay + drive * xi(rng);
        w.wz = w.wz * decay + drive * xi(rng);
    }
    return out;
}

namespace {

AircraftState advance(const AircraftState& s, const StateDerivative& d, double h) {
    AircraftState r = s;
    r.V += h * d.V;
    r.alpha += h * d.alpha;
    r.beta += h * d.beta;
    r.psi += h * d.psi;
    r.theta += h * d.theta;
    r.phi += h * d.phi;
    r.x += h * d.x;
    r.y += h * d.y;
    r.z += h * d.z;
    return r;
}

std::string at_time(std::string_view what, double t) {
    std::ostringstream os;
    os << what << " at t=" << t << " s";
    return os.str();
}

void check_envelope(const AircraftState& s, double t) {
    constexpr double limit = kPi / 2 - kAngleMargin;
    if (!(s.V > 0)) throw RangeError(at_time("profile drives airspeed to V <= 0", t));
    if (std::abs(s.theta) >= limit) throw SingularityError(at_time("|theta| reached pi/2", t), t);
    if (std::abs(s.beta) >= limit) throw SingularityError(at_time("|beta| reached pi/2", t), t);
}

}  // namespace

SensorTrajectory simulate_trajectory(const ManeuverProfile& profile, double dt, double duration,
                                     std::uint64_t seed) {
    if (!(dt > 0) || dt > 0.05) throw InvalidArgument("dt must be in (0, 0.05] s");
    if (!(duration >= 0)) throw InvalidArgument("duration must be >= 0");
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    const std::size_t n = steps + 1;

    const auto gusts = dryden_disturbance(derive_seed(seed, 1), dt, n, profile.turbulence_intensity,
                                          profile.turbulence_timescale);
    // Gust velocities enter as rates over the turbulence length V * T.
    const double length = std::max(profile.airspeed.offset, 1.0) * profile.turbulence_timescale;

    SensorTrajectory traj;
    traj.sample_rate = 1.0 / dt;
    traj.clean.reserve(n);
    traj.labels.assign(n, 0);

    auto derivative = [&](double t, AircraftState s, const WindRates& wind) {
        const ProfileInputs in = profile.inputs(t, s);
        s.wx = in.wx;
        s.wy = in.wy;
        s.wz = in.wz;
        try {
            return state_derivative(s, in.load, wind);
        } catch (const SingularityError& e) {
            throw SingularityError(at_time(e.what(), t), t);
        }
    };

    AircraftState s = profile.initial_state();
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        check_envelope(s, t);
        const ProfileInputs in = profile.inputs(t, s);
        AircraftState recorded = s;
        recorded.wx = in.wx;
        recorded.wy = in.wy;
        recorded.wz = in.wz;
        traj.clean.push_back(to_channels(recorded, in.load));
        if (k == steps) break;

        const WindRates wind{gusts[k].wx / length, gusts[k].wy / length, gusts[k].wz / length};
        const StateDerivative k1 = derivative(t, s, wind);
        const StateDerivative k2 = derivative(t + dt / 2, advance(s, k1, dt / 2), wind);
        const StateDerivative k3 = derivative(t + dt / 2, advance(s, k2, dt / 2), wind);
        const StateDerivative k4 = derivative(t + dt, advance(s, k3, dt), wind);
        StateDerivative sum;
        sum.V = k1.V + 2 * k2.V + 2 * k3.V + k4.V;
        sum.alpha = k1.alpha + 2 * k2.alpha + 2 * k3.alpha + k4.alpha;
        sum.beta = k1.beta + 2 * k2.beta + 2 * k3.beta + k4.beta;
        sum.psi = k1.psi + 2 * k2.psi + 2 * k3.psi + k4.psi;
        sum.theta = k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta;
        sum.phi = k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi;
        sum.x = k1.x + 2 * k2.x + 2 * k3.x + k4.x;
        sum.y = k1.y + 2 * k2.y + 2 * k3.y + k4.y;
        sum.z = k1.z + 2 * k2.z + 2 * k3.z + k4.z;
        s = advance(s, sum, dt / 6);
    }
    traj.measured = traj.clean;
    return traj;
}

ChannelVector NoiseSpec::sigma() const {
    ChannelVector s{};
    s[index(Channel::V)] = airspeed_mps;
    s[index(Channel::Alpha)] = s[index(Channel::Beta)] = flow_angle_deg * kDegToRad;
    s[index(Channel::Gx)] = s[index(Channel::Gy)] = s[index(Channel::Gz)] = load_factor_g;
    s[index(Channel::Wx)] = s[index(Channel::Wy)] = s[index(Channel::Wz)] = body_rate_dps * kDegToRad;
    s[index(Channel::Psi)] = s[index(Channel::Theta)] = s[index(Channel::Phi)] = attitude_deg * kDegToRad;
    s[index(Channel::X)] = s[index(Channel::Y)] = s[index(Channel::Z)] = position_m;
    for (double v : s)
        if (!(v >= 0)) throw InvalidArgument("noise standard deviations must be >= 0");
    return s;
}

SensorTrajectory add_measurement_noise(SensorTrajectory traj, const NoiseSpec& spec, std::uint64_t seed) {
    const ChannelVector sigma = spec.sigma();
    Rng rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    traj.measured.resize(traj.clean.size());
    for (std::size_t i = 0; i < traj.clean.size(); ++i) {
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            traj.measured[i][c] = traj.clean[i][c];
            if (sigma[c] > 0) traj.measured[i][c] += sigma[c] * n01(rng);
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kTrajectoryMagic = "FDCT";
constexpr std::uint32_t kTrajectoryVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize(const SensorTrajectory& traj) {
    const std::size_t n = traj.size();
    if (traj.measured.size() != n || traj.labels.size() != n)
        throw InvalidArgument("trajectory channels have unequal lengths");
    io::ByteWriter w;
    w.put_raw(kTrajectoryMagic);
    w.put(kTrajectoryVersion);
    w.put(traj.sample_rate);
    w.put(static_cast<std::uint64_t>(n));
    w.put(static_cast<std::uint32_t>(kChannelCount));
    for (auto name : channel_names()) w.put_string16(name);
    for (const auto& row : traj.clean) w.put_span(std::span<const double>(row));
    for (const auto& row : traj.measured) w.put_span(std::span<const double>(row));
    w.put_span(std::span<const std::uint8_t>(traj.labels));
    return w.take();
}

SensorTrajectory deserialize_trajectory(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    if (r.get_raw(4) != kTrajectoryMagic) throw FormatError("not an FDCT trajectory");
    const auto version = r.get<std::uint32_t>();
    if (version != kTrajectoryVersion) throw FormatError("unsupported FDCT version " + std::to_string(version));
    SensorTrajectory traj;
    traj.sample_rate = r.get<double>();
    const auto n = r.get<std::uint64_t>();
    const auto channels = r.get<std::uint32_t>();
    if (channels != kChannelCount) throw FormatError("unexpected channel count");
    for (std::size_t c = 0; c < channels; ++c)
        if (r.get_string16() != channel_names()[c]) throw FormatError("unexpected channel order");
    if (r.remaining() != n * (2 * kChannelCount * sizeof(double) + 1))
        throw FormatError("FDCT payload size does not match header");
    traj.clean.resize(n);
    traj.measured.resize(n);
    traj.labels.resize(n);
    for (auto& row : traj.clean) r.get_into(std::span<double>(row));
    for (auto& row : traj.measured) r.get_into(std::span<double>(row));
    r.get_into(std::span<std::uint8_t>(traj.labels));
    return traj;
}

void save_trajectory(const SensorTrajectory& traj, const std::string& path) {
    io::write_file(path, serialize(traj));
}

SensorTrajectory load_trajectory(const std::string& path) {
    return deserialize_trajectory(io::read_file(path));
}

}  // namespace fdc::dynamics
