#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rqdet/detector.hpp"
#include "rqdet/numerics.hpp"

namespace rqdet {

/// Momentum-space wave function psi_0(k) on a grid, normalized on
/// construction so that sum_i mu_i |psi_i|^2 = 1.
class OneParticleState {
 public:
  OneParticleState(MomentumGrid grid, Eigen::VectorXcd psi);

  /// psi ~ exp(-(k - k0)^2 / (4 spread^2)) exp(-i k x0) exp(-i omega_k t0);
  /// `spread` is the standard deviation of |psi|^2.
  static OneParticleState gaussian(const MomentumGrid& grid, double k0, double spread,
                                   double x0 = 0.0, double t0 = 0.0);

  [[nodiscard]] const MomentumGrid& grid() const { return grid_; }
  [[nodiscard]] const Eigen::VectorXcd& psi() const { return psi_; }

 private:
  MomentumGrid grid_;
  Eigen::VectorXcd psi_;
};

/// Columns k, Re psi, Im psi; trapezoid weights on the given nodes.
OneParticleState load_state_csv(const std::string& path, double mass);

/// rho(a, b) = rho_1(k_a, k_b): Hermitian, positive, unit trace under dmu.
class ReducedDensityMatrix {
 public:
  explicit ReducedDensityMatrix(ComplexKernelMatrix rho);
  static ReducedDensityMatrix pure(const OneParticleState& psi);

  [[nodiscard]] const ComplexKernelMatrix& kernel() const { return rho_; }
  [[nodiscard]] const MomentumGrid& grid() const { return rho_.grid(); }
  [[nodiscard]] double trace() const;

 private:
  ComplexKernelMatrix rho_;
};

/// One density value with the relative size of the discarded imaginary part.
struct DensitySample {
  double value = 0.0;
  double imag_residue = 0.0;
};

inline constexpr double kImagResidueTolerance = 1e-8;

/// K(i, j) = f((omega_i + omega_j) / 2).
Eigen::MatrixXcd energy_pair_kernel(const MomentumGrid& grid, const std::function<cplx(double)>& f);

/// prefactor * sum_ij mu_i mu_j rho(j, i) K(i, j) exp(i (theta_i - theta_j)) with
/// theta_i = omega_i tau - k_i q, for a static detector. The kernel is fixed at
/// construction, so scans reuse it.
class LinearDensityEvaluator {
 public:
  LinearDensityEvaluator(ReducedDensityMatrix rho, Eigen::MatrixXcd kernel, double prefactor);

  [[nodiscard]] DensitySample sample(double tau, double q) const;
  [[nodiscard]] double operator()(double tau, double q) const { return sample(tau, q).value; }
  [[nodiscard]] const ReducedDensityMatrix& rho() const { return rho_; }
  [[nodiscard]] const Eigen::MatrixXcd& kernel() const { return kernel_; }

 private:
  ReducedDensityMatrix rho_;
  Eigen::MatrixXcd kernel_;
  double prefactor_;
};

/// Linear coupling, static detector: kernel eta~((omega + omega') / 2), prefactor 2.
LinearDensityEvaluator make_toa_evaluator(const ReducedDensityMatrix& rho, const DetectorConfig& det,
                                          Diagnostics* diag = nullptr);

double toa_density(const ReducedDensityMatrix& rho, const DetectorConfig& det, double tau, double q,
                   Diagnostics* diag = nullptr);

/// |sum_i w_i sqrt(k_i)/omega_i psi_i e^{-i omega_i tau + i k_i q}|^2 (unnormalized).
double ideal_toa_density(const OneParticleState& psi, double tau, double q);
std::vector<double> ideal_toa_scan(const OneParticleState& psi, const Eigen::VectorXd& taus, double q,
                                   TransformPath path = TransformPath::automatic);

/// Nonrelativistic arrival-time density
/// |sum_i w_i sqrt(k_i) psi_i e^{-i k_i^2 tau / (2m) + i k_i q}|^2.
double kijowski_reference(const OneParticleState& psi, double tau, double q);

enum class IdealKernel {
  /// 2 sqrt(|k_r| |k'_r|) with k_r the rest-frame momentum; coincides with
  /// ideal_toa_density for a static detector.
  factorized,
  /// sqrt([(k + k') . u]^2 - 4 m^2), normalized by the same constant.
  exact,
};

/// Linear coupling for a detector on an arbitrary embedding, to first order
/// in s around E(tau): kernel eta~(-(k + k') . u(tau) / 2) and phase
/// (k' - k) . E(tau, q). For constant-velocity embeddings the kernel is built
/// once.
class MovingDensityEvaluator {
 public:
  MovingDensityEvaluator(ReducedDensityMatrix rho, DetectorConfig det, Diagnostics* diag = nullptr);

  /// Replaces eta~ with the ideal kernel.
  MovingDensityEvaluator(ReducedDensityMatrix rho, DetectorConfig det, IdealKernel ideal,
                         Diagnostics* diag = nullptr);

  [[nodiscard]] DensitySample sample(double tau, const Vec3& q) const;
  [[nodiscard]] double operator()(double tau, const Vec3& q) const { return sample(tau, q).value; }

 private:
  [[nodiscard]] Eigen::MatrixXcd kernel_at(const Vec4& u) const;

  ReducedDensityMatrix rho_;
  DetectorConfig det_;
  bool ideal_ = false;
  IdealKernel ideal_kind_ = IdealKernel::factorized;
  double prefactor_ = 2.0;
  Eigen::MatrixXcd cached_;
  Diagnostics* diag_ = nullptr;
};

inline constexpr double kAccelerationValidityBound = 0.1;

double moving_toa_density(const ReducedDensityMatrix& rho, const DetectorConfig& det, double tau,
                          const Vec3& q, Diagnostics* diag = nullptr);
double ideal_moving_toa_density(const ReducedDensityMatrix& rho, const DetectorConfig& det, double tau,
                                const Vec3& q, IdealKernel kind = IdealKernel::factorized,
                                Diagnostics* diag = nullptr);

/// Positive-frequency Wightman function of the free scalar field on a
/// timelike separation, regulated s -> s - i epsilon.
cplx wightman_timelike(double mass, double s, double epsilon);

/// 1 / (10 max|k|).
double default_wightman_epsilon(const MomentumGrid& grid);

/// kappa~(Omega) = int ds e^{i Omega s} 4 g_sigma(s) eta(s) Delta+(s), with
/// Delta+ tabulated once on the s-quadrature nodes.
class QuadraticKernel {
 public:
  /// `omega_max` bounds the frequencies at which kappa~ will be evaluated and
  /// sets the panel width; `refine` subdivides every panel (grid doubling).
  QuadraticKernel(const DetectorConfig& det, double mass, double epsilon, double omega_max,
                  int refine = 1);

  [[nodiscard]] cplx kappa(double s) const;
  [[nodiscard]] cplx kappa_tilde(double omega) const;
  [[nodiscard]] const Diagnostics& diagnostics() const { return diag_; }
  [[nodiscard]] Eigen::Index node_count() const { return nodes_.size(); }

 private:
  DetectorConfig det_;
  double mass_;
  double epsilon_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXcd weighted_;  // w_l kappa(s_l)
  Diagnostics diag_;
};

/// Same quantity through the spectral representation of Delta+:
/// (1/pi^2) int_m^inf dw sqrt(w^2 - m^2) e^{-eps w} eta~_eff(Omega - w).
cplx kappa_tilde_spectral(const DetectorConfig& det, double mass, double epsilon, double omega);

/// Quadratic coupling: the linear evaluator with eta~ replaced by kappa~.
LinearDensityEvaluator make_quadratic_evaluator(const ReducedDensityMatrix& rho,
                                                const DetectorConfig& det, double epsilon,
                                                Diagnostics* diag = nullptr);

double quadratic_toa_density(const OneParticleState& psi, const DetectorConfig& det, double tau,
                             double q, Diagnostics* diag = nullptr);

struct DensityCurve {
  std::vector<double> tau;
  std::vector<double> values;
  std::map<std::string, std::string> metadata;
};

DensityCurve normalize_curve(const DensityCurve& c);

struct ArrivalMoments {
  double mean = 0.0;
  double variance = 0.0;
};

ArrivalMoments arrival_moments(const DensityCurve& c);

/// Window [a, b] around `guess` whose endpoint densities are below
/// `rel` * peak, found by repeated widening.
std::pair<double, double> auto_tau_window(const std::function<double(double)>& density,
                                          std::pair<double, double> guess, double rel = 1e-8);

/// sum_i mu_i rho_ii eta~(omega_i) / |k_i| (time integral of toa_density).
double time_integrated_closed_form(const ReducedDensityMatrix& rho, const DetectorConfig& det,
                                   Diagnostics* diag = nullptr);

/// Numeric time integral of toa_density over an auto-sized window.
Estimate time_integrated_probability(const ReducedDensityMatrix& rho, const DetectorConfig& det,
                                     double q, Diagnostics* diag = nullptr);

/// Classical arrival time q * <omega> / <k> from the diagonal of rho.
double classical_arrival_time(const ReducedDensityMatrix& rho, double q);

}  // namespace rqdet
