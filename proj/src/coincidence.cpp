#include "rqdet/coincidence.hpp"

#include <algorithm>
#include <sstream>

#include "rqdet/csv.hpp"

namespace rqdet {

TwoParticleState::TwoParticleState(MomentumGrid grid, Eigen::MatrixXcd psi2)
    : grid_(std::move(grid)), psi_(std::move(psi2)) {
  const Eigen::Index n = grid_.size();
  if (psi_.rows() != n || psi_.cols() != n) throw ValidationError("two-particle state: psi must be N x N");
  if (!psi_.allFinite()) throw ValidationError("two-particle state: non-finite entries");
  const double scale = std::max(psi_.cwiseAbs().maxCoeff(), 1e-300);
  if ((psi_ - psi_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ValidationError("two-particle state: psi(k1, k2) is not symmetric within 1e-10");
  const auto& mu = grid_.measure_weights();
  const double norm = (mu.asDiagonal() * psi_.cwiseAbs2() * mu.asDiagonal()).sum();
  if (!std::isfinite(norm)) throw ValidationError("two-particle state: norm is not finite");
}

TwoParticleState TwoParticleState::symmetrized_product(const OneParticleState& a, const OneParticleState& b) {
  if (!a.grid().same_as(b.grid())) throw ValidationError("symmetrized product: states must share a grid");
  const Eigen::MatrixXcd ab = a.psi() * b.psi().transpose();
  return TwoParticleState(a.grid(), 0.5 * (ab + ab.transpose()));
}

TwoParticleState load_two_particle_csv(const std::string& path, double mass) {
  const CsvTable table = read_numeric_csv_file(path, 3, 4);
  std::vector<double> ks;
  for (const auto& r : table.rows) ks.push_back(r[0]);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const auto n = static_cast<Eigen::Index>(ks.size());
  if (table.rows.size() != ks.size() * ks.size())
    throw ValidationError("two-particle CSV: expected one row per (k1, k2) node pair");
  auto index = [&](double k) -> Eigen::Index {
    const auto it = std::lower_bound(ks.begin(), ks.end(), k);
    if (it == ks.end() || *it != k) throw ValidationError("two-particle CSV: k2 value not among the k1 nodes");
    return it - ks.begin();
  };
  Eigen::MatrixXcd psi = Eigen::MatrixXcd::Constant(n, n, cplx(kInfinity, 0.0));
  for (const auto& r : table.rows) {
    const Eigen::Index i = index(r[0]), j = index(r[1]);
    if (std::isfinite(psi(i, j).real())) throw ValidationError("two-particle CSV: duplicate (k1, k2) row");
    psi(i, j) = cplx(r[2], r.size() > 3 ? r[3] : 0.0);
  }
  Eigen::VectorXd nodes = Eigen::Map<const Eigen::VectorXd>(ks.data(), n);
  return TwoParticleState(grid_from_nodes(std::move(nodes), mass), std::move(psi));
}

namespace {

// e^{i k_i . X} for every node.
Eigen::VectorXcd plane_waves(const MomentumGrid& g, const Vec4& x) {
  Eigen::VectorXcd e(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) e(i) = std::polar(1.0, g.nodes()(i) * x(1) - g.energies()(i) * x(0));
  return e;
}

Eigen::MatrixXcd weighted_symmetric(const TwoParticleState& s) {
  const auto& mu = s.grid().measure_weights();
  const Eigen::MatrixXcd m = mu.asDiagonal() * s.psi() * mu.asDiagonal();
  return 0.5 * (m + m.transpose());
}

void require_constant_velocity(const DetectorConfig& det) {
  validate(det);
  if (!has_constant_velocity(det.embedding))
    throw ValidationError("joint density: detectors must be static or inertial");
}

}  // namespace

cplx two_particle_amplitude(const TwoParticleState& state, const Vec4& x1, const Vec4& x2) {
  const auto& g = state.grid();
  const auto& mu = g.measure_weights();
  const Eigen::MatrixXcd m = mu.asDiagonal() * state.psi() * mu.asDiagonal();
  const Eigen::VectorXcd e1 = plane_waves(g, x1), e2 = plane_waves(g, x2);
  const cplx a = e1.transpose() * m * e2;
  const cplx b = e2.transpose() * m * e1;
  return 0.5 * (a + b);
}

JointDensityEvaluator::JointDensityEvaluator(TwoParticleState state, DetectorConfig det1,
                                             DetectorConfig det2, Diagnostics* diag)
    : state_(std::move(state)), det_{std::move(det1), std::move(det2)} {
  const auto& g = state_.grid();
  const auto& k = g.nodes();
  const auto& w = g.energies();
  const Eigen::Index n = g.size();
  weighted_ = weighted_symmetric(state_);
  for (int d = 0; d < 2; ++d) {
    require_constant_velocity(det_[d]);
    const Vec4 u = four_velocity(det_[d].embedding, 0.0);
    Eigen::MatrixXcd& sp = spectrum_[d];
    sp.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) {
        const double e = (w(i) + w(j)) * u(0) - (k(i) + k(j)) * u(1);
        sp(i, j) = sp(j, i) = detector_spectrum(det_[d], 0.5 * e, diag);
      }
    if (!sp.allFinite()) throw NumericalError("joint density: non-finite detector spectrum");
  }
}

Eigen::MatrixXcd JointDensityEvaluator::pair_matrix(int d, double tau, double q) const {
  const Vec4 x = embedding_point(det_[d].embedding, tau, Vec3(q, 0.0, 0.0));
  const Eigen::VectorXcd e = plane_waves(state_.grid(), x);
  return e.asDiagonal() * spectrum_[d] * e.conjugate().asDiagonal();
}

SumResult JointDensityEvaluator::ordered(const Eigen::MatrixXcd& ka, const Eigen::MatrixXcd& kb) const {
  const Eigen::MatrixXcd c = ka * weighted_.conjugate() * kb.transpose();
  const Eigen::MatrixXcd terms = weighted_.cwiseProduct(c);
  return {terms.sum(), terms.cwiseAbs().sum()};
}

DensitySample JointDensityEvaluator::sample(double tau1, double q1, double tau2, double q2) const {
  const Eigen::MatrixXcd k1 = pair_matrix(0, tau1, q1);
  const Eigen::MatrixXcd k2 = pair_matrix(1, tau2, q2);
  const SumResult a = ordered(k1, k2);
  const SumResult b = ordered(k2, k1);
  const SumResult r{0.5 * (a.value + b.value), 0.5 * (a.abs_sum + b.abs_sum)};
  const double residue = r.imag_residue();
  if (residue > kImagResidueTolerance) {
    std::ostringstream msg;
    msg << "joint density has imaginary residue " << residue << " relative (limit 1e-8)";
    throw NumericalError(msg.str());
  }
  return {r.value.real(), residue};
}

double joint_toa_density(const TwoParticleState& state, const DetectorConfig& det1,
                         const DetectorConfig& det2, double tau1, double q1, double tau2, double q2,
                         Diagnostics* diag) {
  return JointDensityEvaluator(state, det1, det2, diag)(tau1, q1, tau2, q2);
}

double joint_toa_density_nested(const TwoParticleState& state, const DetectorConfig& det1,
                                const DetectorConfig& det2, double tau1, double q1, double tau2,
                                double q2, Diagnostics* diag) {
  const auto& g = state.grid();
  const Eigen::MatrixXcd m = weighted_symmetric(state);
  const DetectorConfig* dets[2] = {&det1, &det2};
  const double taus[2] = {tau1, tau2};
  const double qs[2] = {q1, q2};
  Eigen::MatrixXcd minus[2], plus[2];
  Eigen::VectorXcd weights[2];
  for (int d = 0; d < 2; ++d) {
    const DetectorConfig& det = *dets[d];
    require_constant_velocity(det);
    const double half = window_halfwidth(det.degradation, det.sigma);
    for (double edge : {-half, half})
      if (diag && std::abs(effective_window(det.degradation, det.sigma, edge)) > 1e-10) {
        std::ostringstream msg;
        msg << "detector " << d + 1 << ": |eta_eff| = " << std::abs(effective_window(det.degradation, det.sigma, edge))
            << " at the window edge s = " << edge;
        diag->warn("window-truncation", msg.str());
      }
    // Highest frequency in s: the plane-wave pair plus the extent of eta~.
    const Vec4 u = four_velocity(det.embedding, 0.0);
    const auto [lo, hi] = spectral_support(det.degradation, det.sigma);
    const double freq = g.energies().maxCoeff() * u(0) + g.nodes().cwiseAbs().maxCoeff() * std::abs(u(1)) +
                        std::max(std::abs(lo), std::abs(hi));
    const int panels = std::clamp(static_cast<int>(std::ceil(2.0 * half * freq / (2.0 * kPi))), 8, 1024);
    const QuadratureRule& rule = gauss_legendre(16);
    const Eigen::Index nodes = panels * rule.nodes.size();
    const double h = 2.0 * half / panels;
    minus[d].resize(nodes, g.size());
    plus[d].resize(nodes, g.size());
    weights[d].resize(nodes);
    Eigen::Index l = 0;
    for (int p = 0; p < panels; ++p)
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i, ++l) {
        const double s = -half + (p + 0.5) * h + 0.5 * h * rule.nodes(i);
        weights[d](l) = 0.5 * h * rule.weights(i) * effective_window(det.degradation, det.sigma, s);
        const Vec3 q(qs[d], 0.0, 0.0);
        minus[d].row(l) = plane_waves(g, embedding_point(det.embedding, taus[d] - 0.5 * s, q)).transpose();
        plus[d].row(l) = plane_waves(g, embedding_point(det.embedding, taus[d] + 0.5 * s, q)).transpose();
      }
  }
  const Eigen::MatrixXcd a_minus = minus[0] * m * minus[1].transpose();
  const Eigen::MatrixXcd a_plus = plus[0] * m * plus[1].transpose();
  const cplx total = (weights[0].asDiagonal() * a_minus.cwiseProduct(a_plus.conjugate()) *
                      weights[1].asDiagonal()).sum();
  return total.real();
}

}  // namespace rqdet
