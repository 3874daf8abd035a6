#pragma once

#include "rqdet/detector.hpp"
#include "rqdet/numerics.hpp"

namespace rqdet {

/// Gaussian coherent pulse
/// zeta_k = (2 pi)^3 zeta0 (2 pi Delta^2)^{-3/2} exp(-(k - k0)^2 / (2 Delta^2)).
struct CoherentPulse {
  Eigen::Vector3cd zeta0 = Eigen::Vector3cd::Zero();
  Vec3 k0 = Vec3::Zero();
  double delta = 0.0;
};

/// zeta0 . k0 = 0 within 1e-10 relative, |k0| > 0, delta > 0.
void validate(const CoherentPulse& p);

/// Beam-axis profile zeta(k) on a massless grid with k > 0; the polarization
/// overlap is 1, so zeta is a scalar.
class CollimatedCoherentProfile {
 public:
  CollimatedCoherentProfile(MomentumGrid grid, Eigen::VectorXcd zeta);

  /// zeta(k) = 2 pi zeta0 (2 pi Delta^2)^{-1/2} exp(-(k - k0)^2 / (2 Delta^2)).
  static CollimatedCoherentProfile gaussian(const MomentumGrid& grid, cplx zeta0, double k0,
                                            double delta);

  /// Reduction of a 3-D pulse onto its own axis. The scalar amplitude has
  /// modulus |zeta0| and phase arg(zeta0 . zeta0) / 2, exact for linear
  /// polarization.
  static CollimatedCoherentProfile from_pulse(const MomentumGrid& grid, const CoherentPulse& p);

  [[nodiscard]] const MomentumGrid& grid() const { return grid_; }
  [[nodiscard]] const Eigen::VectorXcd& zeta() const { return zeta_; }

 private:
  MomentumGrid grid_;
  Eigen::VectorXcd zeta_;
};

/// Columns k, Re zeta, Im zeta; trapezoid weights, massless.
CollimatedCoherentProfile load_profile_csv(const std::string& path);

struct PhotoTerms {
  double p0 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double imag_residue = 0.0;  // of the co-rotating sum

  [[nodiscard]] double total() const { return p0 + p1 + p2; }
};

/// Static detector, collimated coherent state. Pair kernels and the
/// state-independent background are computed once.
///   P0 = int d^3k / ((2 pi)^3 2 w) eta~(w)
///   P1 = 2 sum_ij mu_i mu_j w_i w_j eta~((w_i + w_j) / 2) conj(zeta_j) zeta_i e^{-i(theta_i - theta_j)}
///   P2 = -2 Re sum_ij mu_i mu_j w_i w_j eta~((w_i - w_j) / 2) zeta_i zeta_j e^{-i(theta_i + theta_j)}
/// with theta_i = w_i tau - k_i q.
class PhotoEvaluator {
 public:
  PhotoEvaluator(CollimatedCoherentProfile z, DetectorConfig det, Diagnostics* diag = nullptr);

  [[nodiscard]] PhotoTerms terms(double tau, double q) const;
  [[nodiscard]] double p0() const { return p0_; }
  [[nodiscard]] double p1(double tau, double q) const;
  [[nodiscard]] double p2(double tau, double q) const { return p2_smeared(tau, q, 0.0, 0.0); }

  /// P2 averaged over Gaussian windows of standard deviation `window_sigma`
  /// in tau and `window_delta` in q, done exactly in momentum space.
  [[nodiscard]] double p2_smeared(double tau, double q, double window_sigma, double window_delta) const;

 private:
  CollimatedCoherentProfile z_;
  DetectorConfig det_;
  Eigen::MatrixXcd co_;       // w_i w_j eta~((w_i + w_j) / 2)
  Eigen::MatrixXcd counter_;  // w_i w_j eta~((w_i - w_j) / 2)
  double p0_ = 0.0;
};

PhotoTerms photo_terms_collimated(const CollimatedCoherentProfile& z, const DetectorConfig& det,
                                  double tau, double q, Diagnostics* diag = nullptr);

/// State-independent term for the massless 3-D measure.
double photo_background(const DetectorConfig& det, Diagnostics* diag = nullptr);

/// Saddle-point co-rotating term 1/2 |zeta0|^2 eta0 exp(-Delta^2 |q - v0 tau|^2),
/// v0 = k0 / |k0|. Warns ("pulse-width-ratio") when Delta / |k0| > 0.2.
double gaussian_pulse_p1_closed(const CoherentPulse& p, double eta0, double tau, const Vec3& q,
                                Diagnostics* diag = nullptr);

/// int ds g_sigma(s) eta(s) exp(-Delta^2 s^2).
double pulse_s_integral(const DetectorConfig& det, double delta);

/// Saddle-point counter-rotating term
/// -1/2 Re[zeta0 . zeta0 e^{i k0 . q - i w0 tau}] * s_integral.
double gaussian_pulse_p2_closed(const CoherentPulse& p, double s_integral, double tau, const Vec3& q);

/// exp(-delta^2 k0^2 - sigma^2 k0^2), the coarse-graining bound on the
/// counter-rotating term for a massless pulse.
double counter_rotating_suppression(double sigma, double delta, double k0);

/// 2 |sum_i mu_i w_i zeta_i e^{-i theta_i}|^2, the equal-point rotating-wave
/// correlation function.
double glauber_density(const CollimatedCoherentProfile& z, double tau, double q);

/// sqrt(8 pi) sigma: the weight of g_sigma when it is much narrower than the
/// state's time scales.
double incoherent_scale(double sigma);

}  // namespace rqdet
