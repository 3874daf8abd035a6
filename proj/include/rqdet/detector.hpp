#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rqdet/errors.hpp"
#include "rqdet/numerics.hpp"

namespace rqdet {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Minkowski product with signature (-,+,+,+).
double minkowski_dot(const Vec4& a, const Vec4& b);

/// Natural cubic spline on strictly increasing knots.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);

  [[nodiscard]] double operator()(double x) const;
  [[nodiscard]] double derivative(double x) const;
  [[nodiscard]] double x_min() const { return x_.front(); }
  [[nodiscard]] double x_max() const { return x_.back(); }

 private:
  [[nodiscard]] std::size_t segment(double x) const;
  std::vector<double> x_, y_, m_;  // m_: second derivatives at knots
};

struct StaticEmbedding {};

struct InertialEmbedding {
  Vec3 velocity = Vec3::Zero();
};

/// Hyperbolic motion along +x, at rest at the origin at tau = 0.
struct UniformAccelerationEmbedding {
  double acceleration = 0.0;
};

/// Worldline sampled as (tau, t, x, y, z); the detector point q is a rigid
/// spatial offset from it.
class TabulatedEmbedding {
 public:
  TabulatedEmbedding(const std::vector<double>& tau, const std::vector<Vec4>& points);

  [[nodiscard]] Vec4 point(double tau) const;
  [[nodiscard]] Vec4 tangent(double tau) const;
  [[nodiscard]] double tau_min() const { return coord_[0].x_min(); }
  [[nodiscard]] double tau_max() const { return coord_[0].x_max(); }

 private:
  void check_range(double tau) const;
  CubicSpline coord_[4];
};

TabulatedEmbedding load_worldline_csv(std::istream& in);
TabulatedEmbedding load_worldline_csv(const std::string& path);

using Embedding =
    std::variant<StaticEmbedding, InertialEmbedding, UniformAccelerationEmbedding, TabulatedEmbedding>;

std::string embedding_kind(const Embedding& e);
void validate_embedding(const Embedding& e);

Vec4 embedding_point(const Embedding& e, double tau, const Vec3& q);
Vec4 four_velocity(const Embedding& e, double tau);
double proper_acceleration(const Embedding& e, double tau);
/// True when u(tau) does not depend on tau.
bool has_constant_velocity(const Embedding& e);

/// eta(s) = exp(-i E s) exp(-C T^2 s^2 / 2).
struct GaussianEnergyDegradation {
  double energy = 0.0;
  double heat_capacity = 0.0;
  double temperature = 1.0;
};

/// Record spreading by diffusion: |eta|^2 = (1 + D|s|/delta^2)^(-3/2), phase 0.
struct DiffusionDegradation {
  double diffusion = 1.0;
  double record_size = 1.0;
};

/// eta(s) = exp(-s^2 / (2 tau_d^2)).
struct GaussianDegradation {
  double decay_time = 1.0;
};

/// Uniformly sampled eta(s), linearly interpolated and zero outside the table.
/// Normalized on construction so that eta(0) = 1.
class TabulatedDegradation {
 public:
  TabulatedDegradation(double s0, double ds, std::vector<cplx> values);

  [[nodiscard]] cplx operator()(double s) const;
  [[nodiscard]] double s_min() const { return s0_; }
  [[nodiscard]] double s_max() const { return s0_ + ds_ * static_cast<double>(values_.size() - 1); }
  [[nodiscard]] double spacing() const { return ds_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

 private:
  double s0_;
  double ds_;
  std::vector<cplx> values_;
};

TabulatedDegradation load_degradation_csv(std::istream& in);
TabulatedDegradation load_degradation_csv(const std::string& path);

/// Spectrum reconstructed from an absorption coefficient,
/// eta~(w) = A alpha(w) sqrt(w^2 - m^2) on [m, omega_max], with A chosen so
/// that the implied eta(0) = 1.
class AbsorptionDegradation {
 public:
  AbsorptionDegradation(std::function<double(double)> alpha, double mass, double omega_max);

  [[nodiscard]] double spectrum(double omega) const;  // normalized, zero outside [m, omega_max]
  [[nodiscard]] cplx eta(double s) const;
  [[nodiscard]] double mass() const { return mass_; }
  [[nodiscard]] double omega_max() const { return omega_max_; }
  [[nodiscard]] double normalization() const { return norm_; }

 private:
  std::function<double(double)> alpha_;
  double mass_;
  double omega_max_;
  double norm_ = 1.0;
};

using DegradationFunction = std::variant<GaussianEnergyDegradation, DiffusionDegradation,
                                         GaussianDegradation, TabulatedDegradation,
                                         AbsorptionDegradation>;

std::string degradation_kind(const DegradationFunction& d);
void validate_degradation(const DegradationFunction& d);

cplx eval_eta(const DegradationFunction& d, double s);

/// Decay scale tau_d of |eta|; infinite when eta does not decay.
double decay_time(const DegradationFunction& d);

/// g_sigma(s) = exp(-s^2 / (8 sigma^2)); sigma = +inf gives 1.
double coarse_graining_window(double sigma, double s);

/// g_sigma(s) eta(s).
cplx effective_window(const DegradationFunction& d, double sigma, double s);

/// Half-width of the s-window outside which g_sigma * eta is negligible.
double window_halfwidth(const DegradationFunction& d, double sigma);

/// True when g_sigma * eta is Gaussian and its transform is taken analytically.
bool has_analytic_transform(const DegradationFunction& d);

/// Fourier transform of the effective window, int ds e^{i omega s} g_sigma(s) eta(s).
FourierResult eta_tilde(const DegradationFunction& d, double sigma, double omega);

/// alpha(omega) sqrt(omega^2 - m^2) with unit proportionality constant.
double eta_tilde_from_absorption(const std::function<double(double)>& alpha, double mass,
                                 double omega);

/// Frequency range [lo, hi] outside which |eta~_eff| is negligible.
std::pair<double, double> spectral_support(const DegradationFunction& d, double sigma);

struct DetectorConfig {
  Embedding embedding = StaticEmbedding{};
  double sigma = 1.0;
  double delta = 0.1;
  DegradationFunction degradation = GaussianEnergyDegradation{};
};

/// Throws ValidationError on invalid parameters.
void validate(const DetectorConfig& det);

/// Advisory checks (sigma >> delta).
Diagnostics advisories(const DetectorConfig& det);

/// eta~ of the detector's effective window; flagged transforms are recorded
/// in `diag` when given.
cplx detector_spectrum(const DetectorConfig& det, double omega, Diagnostics* diag = nullptr);

}  // namespace rqdet
