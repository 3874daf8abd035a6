#include "rqdet/scalar.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rqdet/csv.hpp"

namespace rqdet {

OneParticleState::OneParticleState(MomentumGrid grid, Eigen::VectorXcd psi)
    : grid_(std::move(grid)), psi_(std::move(psi)) {
  if (psi_.size() != grid_.size()) throw ValidationError("state: psi length does not match grid");
  if (!psi_.allFinite()) throw ValidationError("state: psi contains non-finite values");
  const double norm = (grid_.measure_weights().array() * psi_.array().abs2()).sum();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("state: psi has zero norm");
  psi_ /= std::sqrt(norm);
}

OneParticleState OneParticleState::gaussian(const MomentumGrid& grid, double k0, double spread,
                                            double x0, double t0) {
  if (!(spread > 0.0)) throw ValidationError("gaussian state: spread must be > 0");
  Eigen::VectorXcd psi(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double k = grid.nodes()(i);
    const double d = (k - k0) / spread;
    psi(i) = std::polar(std::exp(-0.25 * d * d), -k * x0 - grid.energies()(i) * t0);
  }
  return OneParticleState(grid, std::move(psi));
}

OneParticleState load_state_csv(const std::string& path, double mass) {
  const CsvTable table = read_numeric_csv_file(path, 2, 3);
  Eigen::VectorXd k(static_cast<Eigen::Index>(table.rows.size()));
  Eigen::VectorXcd psi(k.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    k(static_cast<Eigen::Index>(i)) = r[0];
    psi(static_cast<Eigen::Index>(i)) = cplx(r[1], r.size() > 2 ? r[2] : 0.0);
  }
  return OneParticleState(grid_from_nodes(std::move(k), mass), std::move(psi));
}

namespace {

void check_density_matrix(const ComplexKernelMatrix& rho, bool check_positive) {
  const Eigen::MatrixXcd& m = rho.entries();
  const double scale = m.cwiseAbs().maxCoeff();
  if (!m.allFinite()) throw ValidationError("density matrix: non-finite entries");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300))
    throw ValidationError("density matrix is not Hermitian within 1e-10");
  const auto& mu = rho.grid().measure_weights();
  const double tr = (mu.array() * m.diagonal().real().array()).sum();
  if (std::abs(tr - 1.0) > 1e-8) {
    std::ostringstream msg;
    msg << "density matrix trace under dmu is " << tr << ", expected 1";
    throw ValidationError(msg.str());
  }
  if (check_positive) {
    const Eigen::VectorXd root = mu.array().sqrt();
    const Eigen::MatrixXcd sym = root.asDiagonal() * m * root.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sym, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    if (ev.minCoeff() < -1e-8 * std::max(ev.maxCoeff(), 0.0))
      throw ValidationError("density matrix is not positive semidefinite");
  }
}

}  // namespace

ReducedDensityMatrix::ReducedDensityMatrix(ComplexKernelMatrix rho) : rho_(std::move(rho)) {
  check_density_matrix(rho_, true);
}

ReducedDensityMatrix ReducedDensityMatrix::pure(const OneParticleState& psi) {
  return ReducedDensityMatrix(
      ComplexKernelMatrix(psi.grid(), psi.psi() * psi.psi().adjoint()));
}

double ReducedDensityMatrix::trace() const {
  return (grid().measure_weights().array() * rho_.entries().diagonal().real().array()).sum();
}

Eigen::MatrixXcd energy_pair_kernel(const MomentumGrid& grid, const std::function<cplx(double)>& f) {
  const auto& w = grid.energies();
  const Eigen::Index n = grid.size();
  Eigen::MatrixXcd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const cplx v = f((w(i) + w(j)) / 2.0);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        std::ostringstream msg;
        msg << "non-finite kernel at node pair (" << i << ", " << j << ")";
        throw NumericalError(msg.str());
      }
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

namespace {

DensitySample finish(const SumResult& r, double prefactor) {
  const double residue = r.imag_residue();
  if (residue > kImagResidueTolerance) {
    std::ostringstream msg;
    msg << "density has imaginary residue " << residue << " relative (limit 1e-8)";
    throw NumericalError(msg.str());
  }
  return {prefactor * r.value.real(), residue};
}

Eigen::VectorXd static_phases(const MomentumGrid& grid, double tau, double q) {
  const auto& k = grid.nodes();
  const auto& w = grid.energies();
  Eigen::VectorXd theta(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) theta(i) = w(i) * tau - k(i) * q;
  return theta;
}

void require_static(const DetectorConfig& det, const char* what) {
  if (!std::holds_alternative<StaticEmbedding>(det.embedding))
    throw ValidationError(std::string(what) + " requires a static detector (use the moving-detector variant)");
}

}  // namespace

LinearDensityEvaluator::LinearDensityEvaluator(ReducedDensityMatrix rho, Eigen::MatrixXcd kernel,
                                               double prefactor)
    : rho_(std::move(rho)), kernel_(std::move(kernel)), prefactor_(prefactor) {
  if (kernel_.rows() != rho_.grid().size() || kernel_.cols() != rho_.grid().size())
    throw ValidationError("density evaluator: kernel does not match grid");
}

DensitySample LinearDensityEvaluator::sample(double tau, double q) const {
  if (!std::isfinite(tau) || !std::isfinite(q)) throw ValidationError("density: non-finite tau or q");
  return finish(separable_double_sum(rho_.kernel(), kernel_, static_phases(rho_.grid(), tau, q)),
                prefactor_);
}

LinearDensityEvaluator make_toa_evaluator(const ReducedDensityMatrix& rho, const DetectorConfig& det,
                                          Diagnostics* diag) {
  validate(det);
  require_static(det, "toa_density");
  Diagnostics local;
  auto kernel = energy_pair_kernel(rho.grid(), [&](double w) { return detector_spectrum(det, w, &local); });
  if (diag) diag->merge(local);
  return LinearDensityEvaluator(rho, std::move(kernel), 2.0);
}

double toa_density(const ReducedDensityMatrix& rho, const DetectorConfig& det, double tau, double q,
                   Diagnostics* diag) {
  return make_toa_evaluator(rho, det, diag)(tau, q);
}

namespace {

void require_positive_nodes(const MomentumGrid& grid, const char* what) {
  if (!(grid.k_min() > 0.0))
    throw ValidationError(std::string(what) + " requires all momentum nodes k > 0");
}

Eigen::VectorXcd ideal_weights(const MomentumGrid& grid) {
  return (grid.nodes().array().sqrt() / grid.energies().array()).cast<cplx>().matrix();
}

}  // namespace

double ideal_toa_density(const OneParticleState& psi, double tau, double q) {
  const auto& grid = psi.grid();
  require_positive_nodes(grid, "ideal_toa_density");
  const auto& k = grid.nodes();
  const auto& w = grid.energies();
  cplx acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    acc += grid.raw_weights()(i) * std::sqrt(k(i)) / w(i) * psi.psi()(i) *
           std::polar(1.0, -w(i) * tau + k(i) * q);
  return std::norm(acc);
}

std::vector<double> ideal_toa_scan(const OneParticleState& psi, const Eigen::VectorXd& taus, double q,
                                   TransformPath path) {
  require_positive_nodes(psi.grid(), "ideal_toa_density");
  const Eigen::VectorXcd a = amplitude_transform(psi.grid(), psi.psi(), ideal_weights(psi.grid()), taus, q, path);
  std::vector<double> out(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = std::norm(a(i));
  return out;
}

double kijowski_reference(const OneParticleState& psi, double tau, double q) {
  const auto& grid = psi.grid();
  require_positive_nodes(grid, "kijowski_reference");
  const double m = grid.mass();
  if (!(m > 0.0)) throw ValidationError("kijowski_reference requires mass > 0");
  const auto& k = grid.nodes();
  cplx acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    acc += grid.raw_weights()(i) * std::sqrt(k(i)) * psi.psi()(i) *
           std::polar(1.0, -k(i) * k(i) * tau / (2.0 * m) + k(i) * q);
  return std::norm(acc);
}

MovingDensityEvaluator::MovingDensityEvaluator(ReducedDensityMatrix rho, DetectorConfig det,
                                               Diagnostics* diag)
    : rho_(std::move(rho)), det_(std::move(det)), diag_(diag) {
  validate(det_);
  if (has_constant_velocity(det_.embedding)) cached_ = kernel_at(four_velocity(det_.embedding, 0.0));
}

MovingDensityEvaluator::MovingDensityEvaluator(ReducedDensityMatrix rho, DetectorConfig det,
                                               IdealKernel ideal, Diagnostics* diag)
    : rho_(std::move(rho)), det_(std::move(det)), ideal_(true), ideal_kind_(ideal), diag_(diag) {
  validate(det_);
  require_positive_nodes(rho_.grid(), "ideal moving density");
  // 2 (4 pi)^2 / 4: turns sum mu mu' 2 sqrt(k k') into the ideal_toa_density normalization.
  prefactor_ = 8.0 * kPi * kPi;
  if (has_constant_velocity(det_.embedding)) cached_ = kernel_at(four_velocity(det_.embedding, 0.0));
}

Eigen::MatrixXcd MovingDensityEvaluator::kernel_at(const Vec4& u) const {
  const auto& grid = rho_.grid();
  const auto& k = grid.nodes();
  const auto& w = grid.energies();
  const double m = grid.mass();
  const Eigen::Index n = grid.size();
  Eigen::MatrixXcd kernel(n, n);
  if (!ideal_) {
    Diagnostics local;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) {
        // -(k + k') . u with k = (omega, k, 0, 0).
        const double e = (w(i) + w(j)) * u(0) - (k(i) + k(j)) * u(1);
        const cplx v = detector_spectrum(det_, e / 2.0, &local);
        kernel(i, j) = v;
        kernel(j, i) = v;
      }
    if (diag_) diag_->merge(local);
    return kernel;
  }
  Eigen::VectorXd rest(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = w(i) * u(0) - k(i) * u(1);
    rest(i) = std::sqrt(std::max(0.0, e * e - m * m));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      double v;
      if (ideal_kind_ == IdealKernel::factorized) {
        v = 2.0 * std::sqrt(rest(i) * rest(j));
      } else {
        const double e = (w(i) + w(j)) * u(0) - (k(i) + k(j)) * u(1);
        v = std::sqrt(std::max(0.0, e * e - 4.0 * m * m));
      }
      kernel(i, j) = v;
      kernel(j, i) = v;
    }
  return kernel;
}

DensitySample MovingDensityEvaluator::sample(double tau, const Vec3& q) const {
  if (!std::isfinite(tau) || !q.allFinite()) throw ValidationError("density: non-finite tau or q");
  const double a = proper_acceleration(det_.embedding, tau);
  if (diag_ && a * det_.sigma >= kAccelerationValidityBound) {
    std::ostringstream msg;
    msg << "a*sigma = " << a * det_.sigma << " >= 0.1; first-order embedding expansion is unreliable";
    diag_->warn("acceleration-validity", msg.str());
  }
  const Vec4 x = embedding_point(det_.embedding, tau, q);
  const auto& grid = rho_.grid();
  Eigen::VectorXd theta(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    theta(i) = grid.energies()(i) * x(0) - grid.nodes()(i) * x(1);
  if (cached_.size() > 0) return finish(separable_double_sum(rho_.kernel(), cached_, theta), prefactor_);
  const Eigen::MatrixXcd kernel = kernel_at(four_velocity(det_.embedding, tau));
  return finish(separable_double_sum(rho_.kernel(), kernel, theta), prefactor_);
}

double moving_toa_density(const ReducedDensityMatrix& rho, const DetectorConfig& det, double tau,
                          const Vec3& q, Diagnostics* diag) {
  return MovingDensityEvaluator(rho, det, diag)(tau, q);
}

double ideal_moving_toa_density(const ReducedDensityMatrix& rho, const DetectorConfig& det, double tau,
                                const Vec3& q, IdealKernel kind, Diagnostics* diag) {
  return MovingDensityEvaluator(rho, det, kind, diag)(tau, q);
}

namespace {

// int_0^inf sinh^2 t e^{-w cosh t} dt = K_1(w) / w for Re w > 0. The rapidity
// contour is rotated by -arg(w), which makes the integrand non-oscillatory on
// the infinite leg; `fineness` shrinks every panel.
cplx rotated_rapidity_integral(cplx w, double fineness) {
  const QuadratureRule& rule = gauss_legendre(16);
  const double phi = std::arg(w);
  const double alpha = -phi;
  const double aw = std::abs(w);
  cplx total{0.0, 0.0};

  // Leg from 0 to i alpha: t = i y, sinh^2 = -sin^2 y, dt = i dy.
  if (alpha != 0.0) {
    const int panels = static_cast<int>(std::ceil(std::max(2.0, 0.5 * aw * std::abs(alpha)) * fineness));
    const double h = alpha / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * h;
      for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
        const double y = mid + 0.5 * h * rule.nodes(q);
        const double sy = std::sin(y);
        total += 0.5 * h * rule.weights(q) * cplx(0.0, -sy * sy) * std::exp(-w * std::cos(y));
      }
    }
  }

  // Leg t = x + i alpha, x in [0, inf).
  const double c2 = std::cos(phi) * std::cos(phi);
  const double s2 = std::sin(phi) * std::sin(phi);
  double x = 0.0;
  double peak = 0.0;
  for (int guard = 0; guard < 100000; ++guard) {
    const double rate = aw * (c2 * std::sinh(x) + s2 * std::cosh(x)) + 2.0;
    const double h = std::min(0.5, 2.0 / rate) / fineness;
    const double mid = x + 0.5 * h;
    cplx panel{0.0, 0.0};
    for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
      const cplx t(mid + 0.5 * h * rule.nodes(q), alpha);
      const cplx sh = std::sinh(t);
      panel += rule.weights(q) * sh * sh * std::exp(-w * std::cosh(t));
    }
    total += 0.5 * h * panel;
    x += h;
    const cplx te(x, alpha);
    const double mag = std::norm(std::sinh(te)) * std::exp(-aw * (c2 * std::cosh(x) + s2 * std::sinh(x)));
    peak = std::max(peak, mag);
    if (x > 1.0 && mag < 1e-20 * peak) return total;
  }
  throw NumericalError("Wightman quadrature did not reach the decaying tail");
}

}  // namespace

cplx wightman_timelike(double mass, double s, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ValidationError("wightman_timelike: epsilon must be > 0");
  if (!std::isfinite(s)) throw ValidationError("wightman_timelike: non-finite s");
  if (!(mass >= 0.0)) throw ValidationError("wightman_timelike: mass must be >= 0");
  if (mass == 0.0) {
    const cplx z(s, -epsilon);
    return -1.0 / (4.0 * kPi * kPi * z * z);
  }
  const cplx w = mass * cplx(epsilon, s);
  const double pref = mass * mass / (4.0 * kPi * kPi);
  cplx coarse = rotated_rapidity_integral(w, 1.0);
  for (double fineness = 2.0; fineness <= 16.0; fineness *= 2.0) {
    const cplx fine = rotated_rapidity_integral(w, fineness);
    if (std::abs(fine - coarse) <= 1e-6 * std::abs(fine)) return pref * fine;
    coarse = fine;
  }
  std::ostringstream msg;
  msg << "Wightman function did not converge to 1e-6 at s = " << s << ", epsilon = " << epsilon;
  throw NumericalError(msg.str());
}

double default_wightman_epsilon(const MomentumGrid& grid) {
  const double kmax = std::max(std::abs(grid.k_min()), std::abs(grid.k_max()));
  return 1.0 / (10.0 * kmax);
}

QuadraticKernel::QuadraticKernel(const DetectorConfig& det, double mass, double epsilon,
                                 double omega_max, int refine)
    : det_(det), mass_(mass), epsilon_(epsilon) {
  validate(det_);
  if (!(epsilon > 0.0)) throw ValidationError("quadratic kernel: epsilon must be > 0");
  if (refine < 1) throw ValidationError("quadratic kernel: refine must be >= 1");
  const double w = window_halfwidth(det_.degradation, det_.sigma);
  if (!std::isfinite(w)) throw ValidationError("quadratic kernel: effective window does not decay");
  double shift = 0.0;
  if (const auto* g = std::get_if<GaussianEnergyDegradation>(&det_.degradation)) shift = std::abs(g->energy);
  const double freq = std::abs(omega_max) + mass + shift + 1.0;
  const double hmax = std::min(w / 16.0, kPi / freq);

  // Panels graded towards s = 0 on the regulator scale epsilon.
  std::vector<double> breaks{0.0};
  double h = std::min(epsilon / 4.0, hmax);
  while (breaks.back() < w) {
    breaks.push_back(std::min(w, breaks.back() + h));
    h = std::min(2.0 * h, hmax);
  }
  const QuadratureRule& rule = gauss_legendre(16);
  std::vector<double> nodes;
  std::vector<double> weights;
  for (int sign : {-1, 1})
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
      const double width = (breaks[p + 1] - breaks[p]) / refine;
      for (int r = 0; r < refine; ++r) {
        const double mid = breaks[p] + (r + 0.5) * width;
        for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
          nodes.push_back(sign * (mid + 0.5 * width * rule.nodes(q)));
          weights.push_back(0.5 * width * rule.weights(q));
        }
      }
    }
  nodes_.resize(static_cast<Eigen::Index>(nodes.size()));
  weighted_.resize(nodes_.size());
  for (std::size_t l = 0; l < nodes.size(); ++l) {
    nodes_(static_cast<Eigen::Index>(l)) = nodes[l];
    weighted_(static_cast<Eigen::Index>(l)) = weights[l] * kappa(nodes[l]);
  }
  const double edge = std::max(std::abs(effective_window(det_.degradation, det_.sigma, w)),
                               std::abs(effective_window(det_.degradation, det_.sigma, -w)));
  if (edge > kFourierEndpointTolerance) {
    std::ostringstream msg;
    msg << "effective window magnitude " << edge << " at the kappa window edge exceeds 1e-12";
    diag_.warn("fourier-window", msg.str());
  }
}

cplx QuadraticKernel::kappa(double s) const {
  return 4.0 * effective_window(det_.degradation, det_.sigma, s) * wightman_timelike(mass_, s, epsilon_);
}

cplx QuadraticKernel::kappa_tilde(double omega) const {
  cplx acc{0.0, 0.0};
  for (Eigen::Index l = 0; l < nodes_.size(); ++l) acc += weighted_(l) * std::polar(1.0, omega * nodes_(l));
  return acc;
}

cplx kappa_tilde_spectral(const DetectorConfig& det, double mass, double epsilon, double omega) {
  validate(det);
  if (!(epsilon > 0.0)) throw ValidationError("kappa_tilde_spectral: epsilon must be > 0");
  const auto [lo, hi] = spectral_support(det.degradation, det.sigma);
  const double w_lo = std::max(mass, omega - hi);
  const double w_hi = std::min(omega - lo, mass + 60.0 / epsilon);
  if (!(w_hi > w_lo)) return 0.0;
  const QuadratureRule& rule = gauss_legendre(16);
  const int panels = 64;
  cplx acc{0.0, 0.0};
  if (mass > 0.0) {
    // omega' = m cosh t: sqrt(w^2 - m^2) dw = m^2 sinh^2 t dt.
    const double t_lo = std::acosh(w_lo / mass);
    const double t_hi = std::acosh(w_hi / mass);
    const double h = (t_hi - t_lo) / panels;
    for (int p = 0; p < panels; ++p)
      for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
        const double t = t_lo + (p + 0.5) * h + 0.5 * h * rule.nodes(q);
        const double wp = mass * std::cosh(t);
        const double sh = std::sinh(t);
        acc += 0.5 * h * rule.weights(q) * mass * mass * sh * sh * std::exp(-epsilon * wp) *
               detector_spectrum(det, omega - wp);
      }
  } else {
    const double h = (w_hi - w_lo) / panels;
    for (int p = 0; p < panels; ++p)
      for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
        const double wp = w_lo + (p + 0.5) * h + 0.5 * h * rule.nodes(q);
        acc += 0.5 * h * rule.weights(q) * wp * std::exp(-epsilon * wp) * detector_spectrum(det, omega - wp);
      }
  }
  return acc / (kPi * kPi);
}

LinearDensityEvaluator make_quadratic_evaluator(const ReducedDensityMatrix& rho,
                                                const DetectorConfig& det, double epsilon,
                                                Diagnostics* diag) {
  require_static(det, "quadratic_toa_density");
  const double omega_max = rho.grid().energies().maxCoeff();
  const QuadraticKernel qk(det, rho.grid().mass(), epsilon, omega_max);
  if (diag) diag->merge(qk.diagnostics());
  auto kernel = energy_pair_kernel(rho.grid(), [&](double w) { return qk.kappa_tilde(w); });
  return LinearDensityEvaluator(rho, std::move(kernel), 2.0);
}

double quadratic_toa_density(const OneParticleState& psi, const DetectorConfig& det, double tau,
                             double q, Diagnostics* diag) {
  const auto rho = ReducedDensityMatrix::pure(psi);
  return make_quadratic_evaluator(rho, det, default_wightman_epsilon(psi.grid()), diag)(tau, q);
}

DensityCurve normalize_curve(const DensityCurve& c) {
  const double area = trapezoid(c.tau, c.values);
  if (!(area > 0.0) || !std::isfinite(area))
    throw ValidationError("normalize_curve: curve has zero or negative total mass");
  DensityCurve out = c;
  for (auto& v : out.values) v /= area;
  return out;
}

ArrivalMoments arrival_moments(const DensityCurve& c) {
  const DensityCurve n = normalize_curve(c);
  std::vector<double> first(n.tau.size()), second(n.tau.size());
  for (std::size_t i = 0; i < n.tau.size(); ++i) first[i] = n.tau[i] * n.values[i];
  const double mean = trapezoid(n.tau, first);
  for (std::size_t i = 0; i < n.tau.size(); ++i) {
    const double d = n.tau[i] - mean;
    second[i] = d * d * n.values[i];
  }
  return {mean, trapezoid(n.tau, second)};
}

std::pair<double, double> auto_tau_window(const std::function<double(double)>& density,
                                          std::pair<double, double> guess, double rel) {
  auto [a, b] = guess;
  if (!(b > a)) throw ValidationError("auto_tau_window: empty initial window");
  for (int iter = 0; iter < 40; ++iter) {
    double peak = 0.0;
    const int samples = 512;
    for (int i = 0; i <= samples; ++i) peak = std::max(peak, std::abs(density(a + (b - a) * i / samples)));
    if (!(peak > 0.0)) throw NumericalError("auto_tau_window: density vanishes on the window");
    const bool left_ok = std::abs(density(a)) < rel * peak;
    const bool right_ok = std::abs(density(b)) < rel * peak;
    if (left_ok && right_ok) return {a, b};
    const double width = b - a;
    if (!left_ok) a -= 0.5 * width;
    if (!right_ok) b += 0.5 * width;
  }
  throw NumericalError("auto_tau_window: density does not decay within the search range");
}

double time_integrated_closed_form(const ReducedDensityMatrix& rho, const DetectorConfig& det,
                                   Diagnostics* diag) {
  const auto& grid = rho.grid();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double k = std::abs(grid.nodes()(i));
    if (!(k > 0.0)) throw ValidationError("time-integrated probability: grid contains k = 0");
    acc += grid.measure_weights()(i) * rho.kernel()(i, i).real() *
           detector_spectrum(det, grid.energies()(i), diag).real() / k;
  }
  return acc;
}

double classical_arrival_time(const ReducedDensityMatrix& rho, double q) {
  const auto& grid = rho.grid();
  double wbar = 0.0;
  double kbar = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double p = grid.measure_weights()(i) * rho.kernel()(i, i).real();
    wbar += p * grid.energies()(i);
    kbar += p * grid.nodes()(i);
  }
  if (kbar == 0.0) throw ValidationError("classical arrival time: mean momentum is zero");
  return q * wbar / kbar;
}

Estimate time_integrated_probability(const ReducedDensityMatrix& rho, const DetectorConfig& det,
                                     double q, Diagnostics* diag) {
  const auto eval = make_toa_evaluator(rho, det, diag);
  auto f = [&](double tau) { return eval(tau, q); };
  const double tc = classical_arrival_time(rho, q);
  const double half = std::max({1.0, 0.1 * std::abs(tc), 10.0 * std::min(det.sigma, 1e6)});
  const auto [a, b] = auto_tau_window(f, {tc - half, tc + half});
  if (a < 0.0 && std::abs(f(a)) > 0.0 && diag) {
    // The integration window reaches negative proper times; report how much
    // weight sits there so the tau < 0 suppression is checked, not assumed.
    double neg = 0.0;
    const QuadratureRule r = gauss_legendre(64, a, std::min(0.0, b));
    for (Eigen::Index i = 0; i < r.nodes.size(); ++i) neg += r.weights(i) * f(r.nodes(i));
    std::ostringstream msg;
    msg << "integration window extends to tau < 0 (weight " << neg << ")";
    diag->warn("negative-tau-weight", msg.str());
  }
  auto integrate = [&](int panels) {
    const QuadratureRule& rule = gauss_legendre(16);
    const double h = (b - a) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p)
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
        acc += 0.5 * h * rule.weights(i) * f(a + (p + 0.5) * h + 0.5 * h * rule.nodes(i));
    return acc;
  };
  return refine_by_doubling(integrate, 64);
}

}  // namespace rqdet
