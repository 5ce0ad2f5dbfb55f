// Longitudinal vehicle models: nonlinear torque-driven plant, the exact
// feedback-linearizing torque law, the third-order linear model, and a
// fixed-step RK4 integrator.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace platoon {

/// Physical constants of one vehicle plus the actuator bounds it accepts.
/// Defaults are the nominal passenger-car values used throughout the project.
struct VehicleParams {
  double mass = 1500.0;              // kg
  double tire_radius = 0.25;         // m
  double motor_efficiency = 0.8;     // (0, 1]
  double powertrain_constant = 0.3;  // s, first-order torque lag
  double drag_coeff = 0.4;
  double friction_coeff = 0.015;
  double air_density = 1.23;  // kg/m^3
  double gravity = 9.78;      // m/s^2
  double u_min = -3.0;        // m/s^2
  double u_max = 3.0;
  double du_min = -30.0;  // m/s^3
  double du_max = 30.0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

struct Externals {
  double wind_speed = 0.0;   // m/s
  double slope_angle = 0.0;  // rad

  void validate() const;
};

/// Full nonlinear state. `acceleration` is not an independent state: it is
/// fixed by the force balance given speed and torque (see
/// `acceleration_from_torque`).
struct VehicleState {
  double position = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
  double torque = 0.0;
};

struct LinearState {
  double position = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
};

VehicleState operator+(const VehicleState& a, const VehicleState& b);
VehicleState operator*(double k, const VehicleState& s);
LinearState operator+(const LinearState& a, const LinearState& b);
LinearState operator*(double k, const LinearState& s);

bool is_finite(const VehicleState& s);
bool is_finite(const LinearState& s);

LinearState to_linear(const VehicleState& s);

/// Acceleration implied by the force balance at the given speed and torque.
double acceleration_from_torque(double speed, double torque,
                                const VehicleParams& params,
                                const Externals& ext);

/// Torque at which the vehicle holds `speed` with zero acceleration.
double equilibrium_torque(double speed, const VehicleParams& params,
                          const Externals& ext);

/// Time derivative of the nonlinear plant for a commanded torque.
///
/// The returned struct holds derivatives field by field: position <- v,
/// speed <- a (from the force balance), acceleration <- da/dt implied by the
/// torque lag, torque <- (T_desired - T) / powertrain_constant.
/// The incoming `state.acceleration` is ignored; acceleration is recomputed
/// from speed and torque.
VehicleState nonlinear_derivative(const VehicleState& state,
                                  double desired_torque,
                                  const VehicleParams& params,
                                  const Externals& ext);

/// Torque command that turns the nonlinear plant into the linear lag
/// da/dt = (u - a) / powertrain_constant when `nominal` matches the truth and
/// there is no wind or slope.
double feedback_linearize(const VehicleState& state, double u_cmd,
                          const VehicleParams& nominal);

/// Derivative of the plant with the linearizing torque law in the loop. The
/// controller uses `nominal` parameters and the measured (true) acceleration;
/// the plant evolves with `truth` and `ext`.
VehicleState closed_loop_derivative(const VehicleState& state, double u_cmd,
                                    const VehicleParams& nominal,
                                    const VehicleParams& truth,
                                    const Externals& ext);

LinearState linear_derivative(const LinearState& state, double u,
                              double powertrain_constant);

/// Output y = p + v + a.
double observe(const LinearState& s);
double observe(const VehicleState& s);

/// One classical Runge-Kutta step of dx/dt = f(x) with any input held
/// constant by the caller's closure. Throws std::domain_error when a stage or
/// the result is not finite.
template <typename State, typename Field>
State step_rk4(const State& x, double dt, Field&& f) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step_rk4: dt must be positive and finite");
  }
  const auto check = [](const State& s, const char* what) {
    if (!is_finite(s)) {
      throw std::domain_error(std::string("step_rk4: non-finite ") + what);
    }
  };
  check(x, "initial state");
  const State k1 = f(x);
  check(k1, "stage 1");
  const State k2 = f(x + (0.5 * dt) * k1);
  check(k2, "stage 2");
  const State k3 = f(x + (0.5 * dt) * k2);
  check(k3, "stage 3");
  const State k4 = f(x + dt * k3);
  check(k4, "stage 4");
  const State next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check(next, "result");
  return next;
}

/// Advances the nonlinear plant one step with the linearizing controller
/// closed around it, then re-derives the algebraic acceleration.
VehicleState step_vehicle(const VehicleState& state, double u_cmd,
                          const VehicleParams& nominal,
                          const VehicleParams& truth, const Externals& ext,
                          double dt);

LinearState step_linear(const LinearState& state, double u,
                        double powertrain_constant, double dt);

/// Draws mass and power-train constant uniformly from nominal +- halfwidth.
/// All other fields are copied. Deterministic in `seed`.
VehicleParams sample_uncertain_params(const VehicleParams& nominal,
                                      double mass_halfwidth,
                                      double powertrain_halfwidth,
                                      std::uint64_t seed);

}  // namespace platoon
