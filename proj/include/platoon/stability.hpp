// Frequency-domain checks for a static policy in feedback with the
// linearized vehicle: plant transfer function, Nyquist sampling, the circle
// criterion over an indented Nyquist contour, and empirical sector bounds.
#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace platoon {

/// Rational function with real coefficients in descending powers of s.
struct TransferFunction {
  std::vector<double> num;
  std::vector<double> den;

  void validate() const;
};

std::complex<double> evaluate(const TransferFunction& tf, std::complex<double> s);

/// G(s) = (s^2 + s + 1) / (c s^2 (s + 1/c)) for power-train constant c,
/// i.e. output p + v + a of the third-order lag model.
TransferFunction plant_tf(double powertrain_constant);

/// s^-1 G(s).
TransferFunction augment_integrator(const TransferFunction& tf);

/// Number of poles at s = 0 (net of zeros at the origin).
int origin_pole_count(const TransferFunction& tf);

/// Roots of the denominator.
std::vector<std::complex<double>> poles(const TransferFunction& tf);

/// Poles with strictly positive real part.
int rhp_pole_count(const TransferFunction& tf);

struct NyquistPoint {
  double omega = 0.0;
  std::complex<double> value;
};

struct NyquistSamples {
  std::vector<NyquistPoint> points;
  /// Grid frequencies dropped because they coincide with a pole.
  std::vector<double> excluded;
};

/// G(j w) on a positive, strictly increasing grid.
NyquistSamples nyquist_samples(const TransferFunction& tf,
                               std::span<const double> omega);

/// n log-spaced points on [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

/// Default grid: 2000 points over [1e-3, 1e3] rad/s.
std::vector<double> default_omega_grid();

struct SectorBounds {
  double k_low = 0.0;
  double k_high = 0.0;
};

struct CircleRegion {
  double center_re = 0.0;
  double center_im = 0.0;
  double radius = 0.0;
};

/// Disk with diameter [-1/k_low, -1/k_high] on the real axis.
CircleRegion circle_region(const SectorBounds& sector);

struct CircleVerdict {
  bool certified = false;
  /// Smallest distance from the contour image to the disk; negative when the
  /// curve enters it.
  double margin = 0.0;
  /// Counter-clockwise encirclements of the disk centre.
  int encirclements = 0;
  int rhp_poles = 0;
  CircleRegion disk;
};

/// Circle criterion on the closed Nyquist contour built from `omega`: the
/// jw axis over the grid (and its mirror), a semicircular detour of radius
/// omega.front() to the right of origin poles, and a closing arc of radius
/// omega.back(). Certified when the image stays outside the disk and
/// encircles it counter-clockwise once per open right-half-plane pole.
/// Throws std::invalid_argument unless 0 < k_low < k_high.
CircleVerdict circle_criterion_check(const TransferFunction& tf,
                                     const SectorBounds& sector,
                                     std::span<const double> omega);

struct SectorEstimate {
  SectorBounds bounds;
  /// policy(0); the bounds are measured on policy(e) - policy(0).
  double offset = 0.0;
};

/// Min/max of (policy(e) - policy(0)) / e over `samples` points spaced
/// evenly on [eps, range] and their mirror images.
SectorEstimate estimate_sector(const std::function<double(double)>& policy,
                               double range, double eps, int samples);

}  // namespace platoon
