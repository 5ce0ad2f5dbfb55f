#include "platoon/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace platoon {

namespace {

using cd = std::complex<double>;

cd horner(const std::vector<double>& coeffs, cd s) {
  cd acc = 0.0;
  for (double c : coeffs) acc = acc * s + c;
  return acc;
}

int trailing_zeros(const std::vector<double>& coeffs) {
  int n = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend() && *it == 0.0; ++it) ++n;
  return n;
}

}  // namespace

void TransferFunction::validate() const {
  if (num.empty() || den.empty()) {
    throw std::invalid_argument("TransferFunction: empty polynomial");
  }
  if (den.front() == 0.0) {
    throw std::invalid_argument(
        "TransferFunction: leading denominator coefficient is zero");
  }
  for (double c : num) {
    if (!std::isfinite(c)) throw std::invalid_argument("TransferFunction: non-finite");
  }
  for (double c : den) {
    if (!std::isfinite(c)) throw std::invalid_argument("TransferFunction: non-finite");
  }
}

cd evaluate(const TransferFunction& tf, cd s) {
  return horner(tf.num, s) / horner(tf.den, s);
}

TransferFunction plant_tf(double powertrain_constant) {
  if (!(powertrain_constant > 0.0)) {
    throw std::invalid_argument("plant_tf: power-train constant must be > 0");
  }
  return {{1.0, 1.0, 1.0}, {powertrain_constant, 1.0, 0.0, 0.0}};
}

TransferFunction augment_integrator(const TransferFunction& tf) {
  tf.validate();
  TransferFunction out = tf;
  out.den.push_back(0.0);
  return out;
}

int origin_pole_count(const TransferFunction& tf) {
  return std::max(0, trailing_zeros(tf.den) - trailing_zeros(tf.num));
}

std::vector<cd> poles(const TransferFunction& tf) {
  tf.validate();
  std::vector<double> d = tf.den;
  const int zeros = trailing_zeros(d);
  d.resize(d.size() - static_cast<std::size_t>(zeros));
  std::vector<cd> out(static_cast<std::size_t>(zeros), cd(0.0, 0.0));
  const auto n = static_cast<Eigen::Index>(d.size()) - 1;
  if (n <= 0) return out;
  // Companion matrix of the monic polynomial.
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    comp(0, k) = -d[static_cast<std::size_t>(k + 1)] / d[0];
  }
  for (Eigen::Index k = 1; k < n; ++k) comp(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (Eigen::Index k = 0; k < n; ++k) out.push_back(es.eigenvalues()(k));
  return out;
}

int rhp_pole_count(const TransferFunction& tf) {
  int n = 0;
  for (const cd& p : poles(tf)) {
    if (p.real() > 1e-9 * std::max(1.0, std::abs(p))) ++n;
  }
  return n;
}

namespace {

void require_grid(std::span<const double> omega) {
  if (omega.empty()) throw std::invalid_argument("omega grid is empty");
  for (std::size_t k = 0; k < omega.size(); ++k) {
    if (!(omega[k] > 0.0) || !std::isfinite(omega[k]) ||
        (k > 0 && !(omega[k] > omega[k - 1]))) {
      throw std::invalid_argument(
          "omega grid must be positive and strictly increasing");
    }
  }
}

bool is_pole_of(const TransferFunction& tf, cd s) {
  const cd d = horner(tf.den, s);
  double scale = 0.0;
  const double r = std::abs(s);
  double pw = 1.0;
  for (auto it = tf.den.rbegin(); it != tf.den.rend(); ++it) {
    scale += std::abs(*it) * pw;
    pw *= r;
  }
  return std::abs(d) <= 1e-14 * scale;
}

}  // namespace

NyquistSamples nyquist_samples(const TransferFunction& tf,
                               std::span<const double> omega) {
  tf.validate();
  require_grid(omega);
  NyquistSamples out;
  out.points.reserve(omega.size());
  for (double w : omega) {
    const cd s(0.0, w);
    if (is_pole_of(tf, s)) {
      out.excluded.push_back(w);
      continue;
    }
    out.points.push_back({w, evaluate(tf, s)});
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) {
    throw std::invalid_argument("log_grid: need 0 < lo < hi and n >= 2");
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = std::pow(10.0, a + (b - a) * k / (n - 1));
  }
  return out;
}

std::vector<double> default_omega_grid() { return log_grid(1e-3, 1e3, 2000); }

CircleRegion circle_region(const SectorBounds& s) {
  if (!(s.k_low > 0.0) || !(s.k_high >= s.k_low) || !std::isfinite(s.k_high)) {
    throw std::invalid_argument("circle_region: need 0 < k_low <= k_high < inf");
  }
  return {-0.5 * (1.0 / s.k_low + 1.0 / s.k_high), 0.0,
          0.5 * (1.0 / s.k_low - 1.0 / s.k_high)};
}

CircleVerdict circle_criterion_check(const TransferFunction& tf,
                                     const SectorBounds& sector,
                                     std::span<const double> omega) {
  tf.validate();
  require_grid(omega);
  if (!(sector.k_low > 0.0) || !(sector.k_high > sector.k_low) ||
      !std::isfinite(sector.k_high)) {
    throw std::invalid_argument(
        "circle_criterion_check: need 0 < k_low < k_high < inf");
  }
  CircleVerdict v;
  v.disk = circle_region(sector);
  v.rhp_poles = rhp_pole_count(tf);

  // Clockwise contour: -jR .. -j rho, detour around s = 0, j rho .. jR, then
  // the arc of radius R back through the right half plane.
  const double rho = omega.front();
  const double big = omega.back();
  constexpr int kDetour = 2000;
  constexpr int kArc = 400;
  std::vector<cd> contour;
  contour.reserve(2 * omega.size() + kDetour + kArc + 2);
  for (auto it = omega.rbegin(); it != omega.rend(); ++it) {
    contour.emplace_back(0.0, -*it);
  }
  if (origin_pole_count(tf) > 0) {
    for (int k = 1; k < kDetour; ++k) {
      const double th = -std::numbers::pi / 2 + std::numbers::pi * k / kDetour;
      contour.push_back(std::polar(rho, th));
    }
  } else {
    contour.emplace_back(0.0, 0.0);
  }
  for (double w : omega) contour.emplace_back(0.0, w);
  for (int k = 1; k < kArc; ++k) {
    const double th = std::numbers::pi / 2 - std::numbers::pi * k / kArc;
    contour.push_back(std::polar(big, th));
  }

  const cd center(v.disk.center_re, v.disk.center_im);
  double min_dist = std::numeric_limits<double>::infinity();
  double winding = 0.0;
  cd prev;
  bool have_prev = false;
  cd first;
  for (const cd& s : contour) {
    if (is_pole_of(tf, s)) continue;
    const cd rel = evaluate(tf, s) - center;
    min_dist = std::min(min_dist, std::abs(rel));
    if (have_prev) {
      winding += std::arg(rel / prev);
    } else {
      first = rel;
      have_prev = true;
    }
    prev = rel;
  }
  if (have_prev) winding += std::arg(first / prev);
  v.margin = min_dist - v.disk.radius;
  v.encirclements = static_cast<int>(std::lround(winding / (2.0 * std::numbers::pi)));
  v.certified = v.margin > 0.0 && v.encirclements == v.rhp_poles;
  return v;
}

SectorEstimate estimate_sector(const std::function<double(double)>& policy,
                               double range, double eps, int samples) {
  if (!(eps > 0.0) || !(range > eps) || samples < 2) {
    throw std::invalid_argument(
        "estimate_sector: need range > eps > 0 and samples >= 2");
  }
  SectorEstimate out;
  out.offset = policy(0.0);
  if (!std::isfinite(out.offset)) {
    throw std::domain_error("estimate_sector: policy(0) is not finite");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int k = 0; k < samples; ++k) {
    const double e = eps + (range - eps) * k / (samples - 1);
    for (double x : {e, -e}) {
      const double y = policy(x);
      if (!std::isfinite(y)) {
        throw std::domain_error("estimate_sector: policy is not finite at " +
                                std::to_string(x));
      }
      const double ratio = (y - out.offset) / x;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  out.bounds = {lo, hi};
  return out;
}

}  // namespace platoon
