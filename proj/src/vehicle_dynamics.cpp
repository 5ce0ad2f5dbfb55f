#include "platoon/vehicle_dynamics.hpp"

#include <random>

namespace platoon {

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

bool finite_all(std::initializer_list<double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void VehicleParams::validate() const {
  require(finite_all({mass, tire_radius, motor_efficiency, powertrain_constant,
                      drag_coeff, friction_coeff, air_density, gravity, u_min,
                      u_max, du_min, du_max}),
          "VehicleParams: all fields must be finite");
  require(mass > 0.0, "VehicleParams: mass must be positive");
  require(tire_radius > 0.0, "VehicleParams: tire_radius must be positive");
  require(motor_efficiency > 0.0 && motor_efficiency <= 1.0,
          "VehicleParams: motor_efficiency must lie in (0, 1]");
  require(powertrain_constant > 0.0,
          "VehicleParams: powertrain_constant must be positive");
  require(u_min < u_max, "VehicleParams: u_min must be below u_max");
  require(du_min < du_max, "VehicleParams: du_min must be below du_max");
}

void Externals::validate() const {
  require(std::isfinite(wind_speed), "Externals: wind_speed must be finite");
  require(std::isfinite(slope_angle) && std::abs(slope_angle) < M_PI / 2.0,
          "Externals: |slope_angle| must be below pi/2");
}

VehicleState operator+(const VehicleState& a, const VehicleState& b) {
  return {a.position + b.position, a.speed + b.speed,
          a.acceleration + b.acceleration, a.torque + b.torque};
}

VehicleState operator*(double k, const VehicleState& s) {
  return {k * s.position, k * s.speed, k * s.acceleration, k * s.torque};
}

LinearState operator+(const LinearState& a, const LinearState& b) {
  return {a.position + b.position, a.speed + b.speed,
          a.acceleration + b.acceleration};
}

LinearState operator*(double k, const LinearState& s) {
  return {k * s.position, k * s.speed, k * s.acceleration};
}

bool is_finite(const VehicleState& s) {
  return finite_all({s.position, s.speed, s.acceleration, s.torque});
}

bool is_finite(const LinearState& s) {
  return finite_all({s.position, s.speed, s.acceleration});
}

LinearState to_linear(const VehicleState& s) {
  return {s.position, s.speed, s.acceleration};
}

double acceleration_from_torque(double speed, double torque,
                                const VehicleParams& p, const Externals& ext) {
  const double air = speed + ext.wind_speed;
  const double force = p.motor_efficiency / p.tire_radius * torque -
                       0.5 * p.air_density * p.drag_coeff * air * air -
                       p.mass * p.gravity * p.friction_coeff *
                           std::cos(ext.slope_angle) -
                       p.mass * p.gravity * std::sin(ext.slope_angle);
  return force / p.mass;
}

double equilibrium_torque(double speed, const VehicleParams& p,
                          const Externals& ext) {
  const double air = speed + ext.wind_speed;
  const double resist =
      0.5 * p.air_density * p.drag_coeff * air * air +
      p.mass * p.gravity *
          (p.friction_coeff * std::cos(ext.slope_angle) +
           std::sin(ext.slope_angle));
  return p.tire_radius / p.motor_efficiency * resist;
}

VehicleState nonlinear_derivative(const VehicleState& state,
                                  double desired_torque,
                                  const VehicleParams& p,
                                  const Externals& ext) {
  if (!is_finite(state) || !std::isfinite(desired_torque)) {
    throw std::domain_error("nonlinear_derivative: non-finite input");
  }
  const double accel =
      acceleration_from_torque(state.speed, state.torque, p, ext);
  const double torque_rate =
      (desired_torque - state.torque) / p.powertrain_constant;
  // m da/dt = (eta/r) dT/dt - rho C (v + v_w) a
  const double jerk = (p.motor_efficiency / p.tire_radius * torque_rate -
                       p.air_density * p.drag_coeff *
                           (state.speed + ext.wind_speed) * accel) /
                      p.mass;
  return {state.speed, accel, jerk, torque_rate};
}

double feedback_linearize(const VehicleState& state, double u_cmd,
                          const VehicleParams& n) {
  const double v = state.speed;
  return n.tire_radius / n.motor_efficiency *
         (0.5 * n.air_density * n.drag_coeff * v *
              (2.0 * n.powertrain_constant * state.acceleration + v) +
          n.mass * n.gravity * n.friction_coeff + n.mass * u_cmd);
}

VehicleState closed_loop_derivative(const VehicleState& state, double u_cmd,
                                    const VehicleParams& nominal,
                                    const VehicleParams& truth,
                                    const Externals& ext) {
  VehicleState measured = state;
  measured.acceleration =
      acceleration_from_torque(state.speed, state.torque, truth, ext);
  const double torque_cmd = feedback_linearize(measured, u_cmd, nominal);
  return nonlinear_derivative(measured, torque_cmd, truth, ext);
}

LinearState linear_derivative(const LinearState& s, double u,
                              double powertrain_constant) {
  return {s.speed, s.acceleration,
          (u - s.acceleration) / powertrain_constant};
}

double observe(const LinearState& s) {
  return s.position + s.speed + s.acceleration;
}

double observe(const VehicleState& s) {
  return s.position + s.speed + s.acceleration;
}

VehicleState step_vehicle(const VehicleState& state, double u_cmd,
                          const VehicleParams& nominal,
                          const VehicleParams& truth, const Externals& ext,
                          double dt) {
  VehicleState next = step_rk4(state, dt, [&](const VehicleState& x) {
    return closed_loop_derivative(x, u_cmd, nominal, truth, ext);
  });
  next.acceleration =
      acceleration_from_torque(next.speed, next.torque, truth, ext);
  return next;
}

LinearState step_linear(const LinearState& state, double u,
                        double powertrain_constant, double dt) {
  return step_rk4(state, dt, [&](const LinearState& x) {
    return linear_derivative(x, u, powertrain_constant);
  });
}

VehicleParams sample_uncertain_params(const VehicleParams& nominal,
                                      double mass_halfwidth,
                                      double powertrain_halfwidth,
                                      std::uint64_t seed) {
  require(mass_halfwidth >= 0.0 && powertrain_halfwidth >= 0.0,
          "sample_uncertain_params: halfwidths must be non-negative");
  require(mass_halfwidth < nominal.mass,
          "sample_uncertain_params: mass halfwidth must be below nominal mass");
  require(powertrain_halfwidth < nominal.powertrain_constant,
          "sample_uncertain_params: powertrain halfwidth must be below the "
          "nominal constant");
  VehicleParams out = nominal;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  // Always draw both so the stream layout does not depend on the widths.
  const double zm = unit(rng);
  const double zp = unit(rng);
  out.mass = nominal.mass + mass_halfwidth * zm;
  out.powertrain_constant =
      nominal.powertrain_constant + powertrain_halfwidth * zp;
  return out;
}

}  // namespace platoon
