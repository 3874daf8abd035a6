#pragma once

#include <map>
#include <string>
#include <vector>

#include "rqdet/detector.hpp"
#include "rqdet/numerics.hpp"
#include "rqdet/scalar.hpp"

namespace rqdet {

using Matrix4cd = Eigen::Matrix4cd;
using Vector4cd = Eigen::Vector4cd;
using Matrix2cd = Eigen::Matrix2cd;

/// Dirac representation: gamma^0 = diag(1, 1, -1, -1),
/// gamma^i = [[0, sigma_i], [-sigma_i, 0]], ubar = u^dagger gamma^0.
struct DiracSpinorBasis {
  explicit DiracSpinorBasis(double mass);

  [[nodiscard]] double mass() const { return mass_; }

  /// u(k, r) = sqrt(w + m) (chi_r, (sigma . k) chi_r / (w + m)), r in {1, 2},
  /// chi_1 = (1, 0), chi_2 = (0, 1).
  [[nodiscard]] Vector4cd u(const Vec3& k, int r) const;

  /// Momentum k along the beam axis z.
  [[nodiscard]] Vector4cd u(double k, int r) const { return u(Vec3(0.0, 0.0, k), r); }

  [[nodiscard]] static Vector4cd bar(const Vector4cd& u);

  [[nodiscard]] static const Matrix4cd& gamma(int mu);

  /// sum_r u(k, r) ubar(k, r) = w gamma^0 - k . gamma + m.
  [[nodiscard]] Matrix4cd spin_sum_projector(const Vec3& k) const;

 private:
  double mass_;
};

/// The operator Sigma^ of T(mu) = (1 + mu Sigma^) / 2 as a 4x4 matrix in
/// spinor space, optionally depending on (Q, p). It must be self-adjoint for
/// the Dirac product, i.e. gamma^0 Sigma^ Hermitian; otherwise the projected
/// 2x2 matrix is not Hermitian.
class SpinPOVMKernel {
 public:
  static SpinPOVMKernel constant(const Matrix4cd& sigma);

  /// Bilinear interpolation on a rectangular (Q, p) table; values[iq * np + ip].
  static SpinPOVMKernel tabulated(std::vector<double> q_nodes, std::vector<double> p_nodes,
                                  std::vector<Matrix4cd> values);

  [[nodiscard]] Matrix4cd operator()(double q, double p) const;
  [[nodiscard]] bool is_constant() const { return q_nodes_.empty(); }

 private:
  SpinPOVMKernel() = default;

  std::vector<double> q_nodes_;
  std::vector<double> p_nodes_;
  std::vector<Matrix4cd> values_;
};

/// Columns Q, p, then Re/Im of the 16 entries in row-major order (34 columns).
SpinPOVMKernel load_spin_kernel_csv(const std::string& path);

/// Throws unless gamma^0 m is Hermitian within 1e-10 relative.
void validate_spin_operator(const Matrix4cd& m);

/// S_{rr'}(Q, k) = (1/2m) ubar(k, r') Sigma^(Q, k) u(k, r). Throws a
/// ValidationError naming (Q, k) when the operator norm exceeds 1 + 1e-8.
Matrix2cd sigma_projected(const SpinPOVMKernel& s, const DiracSpinorBasis& basis, double q, double k);

/// rho(2 i + r, 2 j + r') = rho_1(k_i, r; k_j, r') with r, r' in {0, 1}.
class SpinorReducedDensityMatrix {
 public:
  SpinorReducedDensityMatrix(MomentumGrid grid, Eigen::MatrixXcd rho);

  /// psi is N x 2 (node, spin); normalized on construction.
  static SpinorReducedDensityMatrix pure(const MomentumGrid& grid, Eigen::MatrixX2cd psi);

  /// psi(k) chi with a fixed two-component spinor chi.
  static SpinorReducedDensityMatrix product(const MomentumGrid& grid, const Eigen::VectorXcd& psi,
                                            const Eigen::Vector2cd& chi);

  [[nodiscard]] const MomentumGrid& grid() const { return grid_; }
  [[nodiscard]] const Eigen::MatrixXcd& matrix() const { return rho_; }
  [[nodiscard]] double trace() const;

 private:
  MomentumGrid grid_;
  Eigen::MatrixXcd rho_;
};

/// One-dimensional spin-resolved density at detector position q, ideal kernel
/// sqrt((w + w')^2 - 4 m^2), normalized so that the sum over mu is the
/// spin-summed ideal density. The pair kernel for this q is built once.
class SpinDensityEvaluator {
 public:
  SpinDensityEvaluator(SpinorReducedDensityMatrix rho, const SpinPOVMKernel& s, double q);

  [[nodiscard]] DensitySample sample(double tau, int mu) const;
  [[nodiscard]] double operator()(double tau, int mu) const { return sample(tau, mu).value; }

 private:
  SpinorReducedDensityMatrix rho_;
  double q_;
  Eigen::MatrixXcd plain_;  // rho * sqrt(...) ubar(k_j, r') u(k_i, r)
  Eigen::MatrixXcd sigma_;  // rho * sqrt(...) ubar(k_j, r') Sigma^ u(k_i, r)
};

double spin_toa_density(const SpinorReducedDensityMatrix& rho, const SpinPOVMKernel& s,
                        const DetectorConfig& det, double tau, double q, int mu);

/// (1/2m) sum rho ubar(k', r) u(k, r) sqrt((w + w')^2 - 4 m^2) e^{...}, with
/// the spinor product written out for momenta on the beam axis.
double spin_summed_density(const SpinorReducedDensityMatrix& rho, double tau, double q);

/// P(mu) = (1 + mu sum_i mu_i sum_{rr'} rho(k_i, r; k_i, r') S_{rr'}(Q, k_i)) / 2,
/// with P(+1) + P(-1) = 1 exactly. Out-of-range values are reported as
/// "spectral-bound" warnings.
std::map<int, double> spin_outcome_probability(const SpinorReducedDensityMatrix& rho,
                                               const SpinPOVMKernel& s, double q,
                                               Diagnostics* diag = nullptr);

}  // namespace rqdet
