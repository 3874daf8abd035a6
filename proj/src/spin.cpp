#include "rqdet/spin.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "rqdet/csv.hpp"

namespace rqdet {

namespace {

std::array<Matrix4cd, 4> make_gammas() {
  const cplx i{0.0, 1.0};
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, -i, i, 0;
  sz << 1, 0, 0, -1;
  std::array<Matrix4cd, 4> g;
  g[0] = Matrix4cd::Zero();
  g[0].diagonal() << 1, 1, -1, -1;
  const std::array<Eigen::Matrix2cd, 3> s{sx, sy, sz};
  for (int a = 0; a < 3; ++a) {
    g[a + 1] = Matrix4cd::Zero();
    g[a + 1].topRightCorner<2, 2>() = s[a];
    g[a + 1].bottomLeftCorner<2, 2>() = -s[a];
  }
  return g;
}

const std::array<Matrix4cd, 4>& gammas() {
  static const std::array<Matrix4cd, 4> g = make_gammas();
  return g;
}

void check_spin_index(int r) {
  if (r != 1 && r != 2) throw ValidationError("spinor index r must be 1 or 2");
}

void check_outcome(int mu) {
  if (mu != 1 && mu != -1) throw ValidationError("spin outcome mu must be +1 or -1");
}

}  // namespace

DiracSpinorBasis::DiracSpinorBasis(double mass) : mass_(mass) {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ValidationError("Dirac basis: mass must be > 0");
}

Vector4cd DiracSpinorBasis::u(const Vec3& k, int r) const {
  check_spin_index(r);
  if (!k.allFinite()) throw ValidationError("Dirac basis: non-finite momentum");
  const double w = std::sqrt(k.squaredNorm() + mass_ * mass_);
  const double a = std::sqrt(w + mass_);
  const cplx i{0.0, 1.0};
  Eigen::Vector2cd chi = Eigen::Vector2cd::Zero();
  chi(r - 1) = 1.0;
  // (sigma . k) chi
  const Eigen::Vector2cd lower(k(2) * chi(0) + (k(0) - i * k(1)) * chi(1),
                               (k(0) + i * k(1)) * chi(0) - k(2) * chi(1));
  Vector4cd out;
  out << a * chi, lower / a;
  return out;
}

Vector4cd DiracSpinorBasis::bar(const Vector4cd& u) {
  // Row vector u^dagger gamma^0, returned as a column.
  Vector4cd b = u.conjugate();
  b(2) = -b(2);
  b(3) = -b(3);
  return b;
}

const Matrix4cd& DiracSpinorBasis::gamma(int mu) {
  if (mu < 0 || mu > 3) throw ValidationError("gamma index must be 0..3");
  return gammas()[static_cast<std::size_t>(mu)];
}

Matrix4cd DiracSpinorBasis::spin_sum_projector(const Vec3& k) const {
  const double w = std::sqrt(k.squaredNorm() + mass_ * mass_);
  Matrix4cd p = w * gamma(0) + mass_ * Matrix4cd::Identity();
  for (int a = 0; a < 3; ++a) p -= k(a) * gamma(a + 1);
  return p;
}

void validate_spin_operator(const Matrix4cd& m) {
  if (!m.allFinite()) throw ValidationError("spin operator: non-finite entries");
  const Matrix4cd g = DiracSpinorBasis::gamma(0) * m;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((g - g.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ValidationError("spin operator: gamma^0 Sigma is not Hermitian within 1e-10");
}

SpinPOVMKernel SpinPOVMKernel::constant(const Matrix4cd& sigma) {
  validate_spin_operator(sigma);
  SpinPOVMKernel k;
  k.values_.push_back(sigma);
  return k;
}

SpinPOVMKernel SpinPOVMKernel::tabulated(std::vector<double> q_nodes, std::vector<double> p_nodes,
                                         std::vector<Matrix4cd> values) {
  auto increasing = [](const std::vector<double>& v) {
    if (v.size() < 2) return false;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1]) || !std::isfinite(v[i])) return false;
    return std::isfinite(v[0]);
  };
  if (!increasing(q_nodes) || !increasing(p_nodes))
    throw ValidationError("spin kernel table: Q and p nodes must be strictly increasing, at least 2 each");
  if (values.size() != q_nodes.size() * p_nodes.size())
    throw ValidationError("spin kernel table: value count does not match the (Q, p) grid");
  for (std::size_t n = 0; n < values.size(); ++n) {
    try {
      validate_spin_operator(values[n]);
    } catch (const ValidationError& e) {
      std::ostringstream msg;
      msg << e.what() << " at Q = " << q_nodes[n / p_nodes.size()] << ", p = " << p_nodes[n % p_nodes.size()];
      throw ValidationError(msg.str());
    }
  }
  SpinPOVMKernel k;
  k.q_nodes_ = std::move(q_nodes);
  k.p_nodes_ = std::move(p_nodes);
  k.values_ = std::move(values);
  return k;
}

Matrix4cd SpinPOVMKernel::operator()(double q, double p) const {
  if (is_constant()) return values_.front();
  auto locate = [](const std::vector<double>& x, double v, const char* name, double q, double p) {
    if (!(v >= x.front() && v <= x.back())) {
      std::ostringstream msg;
      msg << "spin kernel table: " << name << " outside the tabulated range at (Q, p) = (" << q << ", " << p << ")";
      throw ValidationError(msg.str());
    }
    const auto it = std::upper_bound(x.begin(), x.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - x.begin());
    hi = std::clamp<std::size_t>(hi, 1, x.size() - 1);
    const double t = (v - x[hi - 1]) / (x[hi] - x[hi - 1]);
    return std::pair<std::size_t, double>{hi - 1, t};
  };
  const auto [iq, tq] = locate(q_nodes_, q, "Q", q, p);
  const auto [ip, tp] = locate(p_nodes_, p, "p", q, p);
  const std::size_t np = p_nodes_.size();
  const Matrix4cd& a = values_[iq * np + ip];
  const Matrix4cd& b = values_[iq * np + ip + 1];
  const Matrix4cd& c = values_[(iq + 1) * np + ip];
  const Matrix4cd& d = values_[(iq + 1) * np + ip + 1];
  return (1 - tq) * ((1 - tp) * a + tp * b) + tq * ((1 - tp) * c + tp * d);
}

SpinPOVMKernel load_spin_kernel_csv(const std::string& path) {
  const CsvTable table = read_numeric_csv_file(path, 34, 34);
  std::vector<double> qs, ps;
  for (const auto& r : table.rows) {
    qs.push_back(r[0]);
    ps.push_back(r[1]);
  }
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
  if (table.rows.size() != qs.size() * ps.size())
    throw ValidationError("spin kernel CSV: rows do not form a complete rectangular (Q, p) grid");
  std::vector<Matrix4cd> values(table.rows.size());
  std::vector<bool> seen(table.rows.size(), false);
  for (const auto& r : table.rows) {
    const auto iq = static_cast<std::size_t>(std::lower_bound(qs.begin(), qs.end(), r[0]) - qs.begin());
    const auto ip = static_cast<std::size_t>(std::lower_bound(ps.begin(), ps.end(), r[1]) - ps.begin());
    const std::size_t n = iq * ps.size() + ip;
    if (seen[n]) throw ValidationError("spin kernel CSV: duplicate (Q, p) row");
    seen[n] = true;
    for (int e = 0; e < 16; ++e) values[n](e / 4, e % 4) = cplx(r[2 + 2 * e], r[3 + 2 * e]);
  }
  return SpinPOVMKernel::tabulated(std::move(qs), std::move(ps), std::move(values));
}

Matrix2cd sigma_projected(const SpinPOVMKernel& s, const DiracSpinorBasis& basis, double q, double k) {
  const Matrix4cd m = s(q, k);
  std::array<Vector4cd, 2> u{basis.u(k, 1), basis.u(k, 2)};
  Matrix2cd out;
  for (int r = 0; r < 2; ++r)
    for (int rp = 0; rp < 2; ++rp)
      out(r, rp) = (DiracSpinorBasis::bar(u[rp]).transpose() * m * u[r])(0, 0) / (2.0 * basis.mass());
  const double norm = Eigen::JacobiSVD<Matrix2cd>(out).singularValues()(0);
  if (norm > 1.0 + 1e-8) {
    std::ostringstream msg;
    msg << "spin kernel violates the spectral bound: |Sigma_rr'| = " << norm << " at (Q, k) = (" << q
        << ", " << k << ")";
    throw ValidationError(msg.str());
  }
  return out;
}

SpinorReducedDensityMatrix::SpinorReducedDensityMatrix(MomentumGrid grid, Eigen::MatrixXcd rho)
    : grid_(std::move(grid)), rho_(std::move(rho)) {
  if (!(grid_.mass() > 0.0)) throw ValidationError("spinor density matrix: mass must be > 0");
  const Eigen::Index n = 2 * grid_.size();
  if (rho_.rows() != n || rho_.cols() != n)
    throw ValidationError("spinor density matrix: expected a 2N x 2N matrix");
  if (!rho_.allFinite()) throw ValidationError("spinor density matrix: non-finite entries");
  const double scale = std::max(rho_.cwiseAbs().maxCoeff(), 1e-300);
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ValidationError("spinor density matrix is not Hermitian within 1e-10");
  const double tr = trace();
  if (std::abs(tr - 1.0) > 1e-8) {
    std::ostringstream msg;
    msg << "spinor density matrix trace under dmu is " << tr << ", expected 1";
    throw ValidationError(msg.str());
  }
  Eigen::VectorXd root(n);
  for (Eigen::Index i = 0; i < grid_.size(); ++i) root(2 * i) = root(2 * i + 1) = std::sqrt(grid_.measure_weights()(i));
  const Eigen::MatrixXcd sym = root.asDiagonal() * rho_ * root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  if (ev.minCoeff() < -1e-8 * std::max(ev.maxCoeff(), 0.0))
    throw ValidationError("spinor density matrix is not positive semidefinite");
}

SpinorReducedDensityMatrix SpinorReducedDensityMatrix::pure(const MomentumGrid& grid, Eigen::MatrixX2cd psi) {
  if (psi.rows() != grid.size()) throw ValidationError("spinor state: psi rows do not match grid");
  const double norm = (grid.measure_weights().array() * psi.rowwise().squaredNorm().array()).sum();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("spinor state: psi has zero norm");
  psi /= std::sqrt(norm);
  Eigen::VectorXcd flat(2 * grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    flat(2 * i) = psi(i, 0);
    flat(2 * i + 1) = psi(i, 1);
  }
  return SpinorReducedDensityMatrix(grid, flat * flat.adjoint());
}

SpinorReducedDensityMatrix SpinorReducedDensityMatrix::product(const MomentumGrid& grid,
                                                               const Eigen::VectorXcd& psi,
                                                               const Eigen::Vector2cd& chi) {
  if (psi.size() != grid.size()) throw ValidationError("spinor state: psi length does not match grid");
  Eigen::MatrixX2cd full(grid.size(), 2);
  full.col(0) = psi * chi(0);
  full.col(1) = psi * chi(1);
  return pure(grid, std::move(full));
}

double SpinorReducedDensityMatrix::trace() const {
  double tr = 0.0;
  for (Eigen::Index i = 0; i < grid_.size(); ++i)
    tr += grid_.measure_weights()(i) * (rho_(2 * i, 2 * i).real() + rho_(2 * i + 1, 2 * i + 1).real());
  return tr;
}

SpinDensityEvaluator::SpinDensityEvaluator(SpinorReducedDensityMatrix rho, const SpinPOVMKernel& s, double q)
    : rho_(std::move(rho)), q_(q) {
  const auto& g = rho_.grid();
  const DiracSpinorBasis basis(g.mass());
  const Eigen::Index n = g.size();
  std::vector<std::array<Vector4cd, 2>> u(static_cast<std::size_t>(n)), ub(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (int r = 0; r < 2; ++r) {
      u[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] = basis.u(g.nodes()(i), r + 1);
      ub[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] =
          DiracSpinorBasis::bar(u[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)]);
    }
  const double m = g.mass();
  const auto& w = g.energies();
  plain_.resize(2 * n, 2 * n);
  sigma_.resize(2 * n, 2 * n);
  const Matrix4cd fixed = s.is_constant() ? s(q, 0.0) : Matrix4cd::Zero();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double ws = w(i) + w(j);
      const double weight = std::sqrt(std::max(ws * ws - 4.0 * m * m, 0.0));
      const Matrix4cd sig = s.is_constant() ? fixed : s(q, 0.5 * (g.nodes()(i) + g.nodes()(j)));
      for (int r = 0; r < 2; ++r)
        for (int rp = 0; rp < 2; ++rp) {
          const auto& a = u[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
          const auto& b = ub[static_cast<std::size_t>(j)][static_cast<std::size_t>(rp)];
          const Eigen::Index row = 2 * i + r, col = 2 * j + rp;
          plain_(row, col) = weight * rho_.matrix()(row, col) * (b.transpose() * a)(0, 0);
          sigma_(row, col) = weight * rho_.matrix()(row, col) * (b.transpose() * sig * a)(0, 0);
        }
    }
}

DensitySample SpinDensityEvaluator::sample(double tau, int mu) const {
  check_outcome(mu);
  const auto& g = rho_.grid();
  const Eigen::Index n = g.size();
  Eigen::VectorXcd y(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = g.energies()(i) * tau - g.nodes()(i) * q_;
    y(2 * i) = y(2 * i + 1) = g.measure_weights()(i) * std::polar(1.0, -theta);
  }
  cplx acc{0.0, 0.0};
  double abs_sum = 0.0;
  for (Eigen::Index a = 0; a < 2 * n; ++a) {
    cplx row{0.0, 0.0};
    for (Eigen::Index b = 0; b < 2 * n; ++b) {
      const cplx t = (plain_(a, b) + static_cast<double>(mu) * sigma_(a, b)) * std::conj(y(b));
      row += t;
      abs_sum += std::abs(t) * std::abs(y(a));
    }
    acc += y(a) * row;
  }
  const double residue = abs_sum > 0.0 ? std::abs(acc.imag()) / abs_sum : 0.0;
  if (residue > kImagResidueTolerance) {
    std::ostringstream msg;
    msg << "spin density has imaginary residue " << residue << " relative (limit 1e-8)";
    throw NumericalError(msg.str());
  }
  return {acc.real() / (4.0 * g.mass()), residue};
}

double spin_toa_density(const SpinorReducedDensityMatrix& rho, const SpinPOVMKernel& s,
                        const DetectorConfig& det, double tau, double q, int mu) {
  validate(det);
  if (!std::holds_alternative<StaticEmbedding>(det.embedding))
    throw ValidationError("spin density: only static detectors are supported");
  return SpinDensityEvaluator(rho, s, q)(tau, mu);
}

double spin_summed_density(const SpinorReducedDensityMatrix& rho, double tau, double q) {
  const auto& g = rho.grid();
  const double m = g.mass();
  const Eigen::Index n = g.size();
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x(i) = g.measure_weights()(i) * std::polar(1.0, -(g.energies()(i) * tau - g.nodes()(i) * q));
  cplx acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wi = g.energies()(i), wj = g.energies()(j);
      const double root = std::sqrt((wi + m) * (wj + m));
      // ubar(k', r) u(k, r) for momenta along the spin quantization axis.
      const double overlap = root - g.nodes()(i) * g.nodes()(j) / root;
      const double weight = std::sqrt(std::max((wi + wj) * (wi + wj) - 4.0 * m * m, 0.0));
      const cplx block = rho.matrix()(2 * i, 2 * j) + rho.matrix()(2 * i + 1, 2 * j + 1);
      acc += x(i) * std::conj(x(j)) * block * overlap * weight;
    }
  return acc.real() / (2.0 * m);
}

std::map<int, double> spin_outcome_probability(const SpinorReducedDensityMatrix& rho,
                                               const SpinPOVMKernel& s, double q, Diagnostics* diag) {
  const auto& g = rho.grid();
  const DiracSpinorBasis basis(g.mass());
  cplx p{0.0, 0.0};
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Matrix2cd sp = sigma_projected(s, basis, q, g.nodes()(i));
    const auto block = rho.matrix().block<2, 2>(2 * i, 2 * i);
    p += g.measure_weights()(i) * block.cwiseProduct(sp).sum();
  }
  const double c = p.real();
  const double larger = 0.5 * (1.0 + std::abs(c));
  const double smaller = 1.0 - larger;
  if (diag && (larger > 1.0 + 1e-10 || smaller < -1e-10)) {
    std::ostringstream msg;
    msg << "outcome probability " << larger << " outside [0, 1]";
    diag->warn("spectral-bound", msg.str());
  }
  return c >= 0.0 ? std::map<int, double>{{1, larger}, {-1, smaller}}
                  : std::map<int, double>{{1, smaller}, {-1, larger}};
}

}  // namespace rqdet
