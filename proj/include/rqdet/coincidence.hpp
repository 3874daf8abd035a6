#pragma once

#include <string>

#include "rqdet/detector.hpp"
#include "rqdet/numerics.hpp"
#include "rqdet/scalar.hpp"

namespace rqdet {

/// Bosonic two-particle wave function psi(k_i, k_j) on a shared grid. Not
/// normalized; sum_ij mu_i mu_j |psi_ij|^2 must be finite.
class TwoParticleState {
 public:
  /// psi2 must be symmetric within 1e-10 relative.
  TwoParticleState(MomentumGrid grid, Eigen::MatrixXcd psi2);

  /// (a_i b_j + b_i a_j) / 2; both states on the same grid.
  static TwoParticleState symmetrized_product(const OneParticleState& a, const OneParticleState& b);

  [[nodiscard]] const MomentumGrid& grid() const { return grid_; }
  [[nodiscard]] const Eigen::MatrixXcd& psi() const { return psi_; }

 private:
  MomentumGrid grid_;
  Eigen::MatrixXcd psi_;
};

/// Long format: columns k1, k2, Re psi, Im psi, one row per node pair.
TwoParticleState load_two_particle_csv(const std::string& path, double mass);

/// sum_ij mu_i mu_j psi_ij [e^{i k_i.X1 + i k_j.X2} + e^{i k_i.X2 + i k_j.X1}] / 2,
/// with k = (omega, k, 0, 0) and k.X = k x - omega t.
cplx two_particle_amplitude(const TwoParticleState& state, const Vec4& x1, const Vec4& x2);

/// Joint density of one detection at (tau1, q1) by det1 and one at (tau2, q2) by det2:
///   int ds1 ds2 eta1_eff(s1) eta2_eff(s2) A(X1-, X2-) conj(A(X1+, X2+)),
/// X_d+- = E_d(tau_d +- s_d / 2, q_d). Detectors must be static or inertial,
/// so each s-integral reduces to a pair matrix built from eta~. The result is
/// symmetrized over the order of the two events, which makes the exchange of
/// identical detectors exact.
class JointDensityEvaluator {
 public:
  JointDensityEvaluator(TwoParticleState state, DetectorConfig det1, DetectorConfig det2,
                        Diagnostics* diag = nullptr);

  [[nodiscard]] DensitySample sample(double tau1, double q1, double tau2, double q2) const;
  [[nodiscard]] double operator()(double tau1, double q1, double tau2, double q2) const {
    return sample(tau1, q1, tau2, q2).value;
  }

 private:
  [[nodiscard]] Eigen::MatrixXcd pair_matrix(int d, double tau, double q) const;
  [[nodiscard]] SumResult ordered(const Eigen::MatrixXcd& ka, const Eigen::MatrixXcd& kb) const;

  TwoParticleState state_;
  DetectorConfig det_[2];
  Eigen::MatrixXcd weighted_;  // mu_i mu_j psi_ij, exactly symmetric
  Eigen::MatrixXcd spectrum_[2];  // eta~(-(k_i + k_j) . u / 2)
};

double joint_toa_density(const TwoParticleState& state, const DetectorConfig& det1,
                         const DetectorConfig& det2, double tau1, double q1, double tau2, double q2,
                         Diagnostics* diag = nullptr);

/// The same density by direct quadrature over (s1, s2) on each detector's
/// window. Warns ("window-truncation") when |eta_eff| exceeds 1e-10 at a
/// window edge.
double joint_toa_density_nested(const TwoParticleState& state, const DetectorConfig& det1,
                                const DetectorConfig& det2, double tau1, double q1, double tau2,
                                double q2, Diagnostics* diag = nullptr);

}  // namespace rqdet
