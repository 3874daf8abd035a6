#include "rqdet/photo.hpp"

#include <sstream>

#include "rqdet/csv.hpp"

namespace rqdet {

void validate(const CoherentPulse& p) {
  if (!p.zeta0.allFinite() || !p.k0.allFinite()) throw ValidationError("pulse: non-finite parameters");
  const double k = p.k0.norm();
  if (!(k > 0.0)) throw ValidationError("pulse: k0 must be nonzero");
  if (!(p.delta > 0.0) || !std::isfinite(p.delta)) throw ValidationError("pulse: delta must be > 0");
  const cplx dot = p.zeta0(0) * p.k0(0) + p.zeta0(1) * p.k0(1) + p.zeta0(2) * p.k0(2);
  if (std::abs(dot) > 1e-10 * p.zeta0.norm() * k) {
    std::ostringstream msg;
    msg << "pulse: zeta0 is not transverse to k0 (|zeta0 . k0| = " << std::abs(dot) << ")";
    throw ValidationError(msg.str());
  }
}

CollimatedCoherentProfile::CollimatedCoherentProfile(MomentumGrid grid, Eigen::VectorXcd zeta)
    : grid_(std::move(grid)), zeta_(std::move(zeta)) {
  if (grid_.mass() != 0.0) throw ValidationError("collimated profile: grid must be massless");
  if (!(grid_.k_min() > 0.0)) throw ValidationError("collimated profile: grid nodes must be positive");
  if (zeta_.size() != grid_.size()) throw ValidationError("collimated profile: zeta length does not match grid");
  if (!zeta_.allFinite()) throw ValidationError("collimated profile: zeta contains non-finite values");
}

CollimatedCoherentProfile CollimatedCoherentProfile::gaussian(const MomentumGrid& grid, cplx zeta0,
                                                              double k0, double delta) {
  if (!(delta > 0.0)) throw ValidationError("collimated profile: delta must be > 0");
  const double norm = 2.0 * kPi / std::sqrt(2.0 * kPi * delta * delta);
  Eigen::VectorXcd z(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double d = (grid.nodes()(i) - k0) / delta;
    z(i) = zeta0 * norm * std::exp(-0.5 * d * d);
  }
  return CollimatedCoherentProfile(grid, std::move(z));
}

CollimatedCoherentProfile CollimatedCoherentProfile::from_pulse(const MomentumGrid& grid,
                                                                const CoherentPulse& p) {
  validate(p);
  const cplx sq = p.zeta0(0) * p.zeta0(0) + p.zeta0(1) * p.zeta0(1) + p.zeta0(2) * p.zeta0(2);
  const cplx amp = std::polar(p.zeta0.norm(), 0.5 * std::arg(sq));
  return gaussian(grid, amp, p.k0.norm(), p.delta);
}

CollimatedCoherentProfile load_profile_csv(const std::string& path) {
  const CsvTable table = read_numeric_csv_file(path, 2, 3);
  Eigen::VectorXd k(static_cast<Eigen::Index>(table.rows.size()));
  Eigen::VectorXcd z(k.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    k(static_cast<Eigen::Index>(i)) = r[0];
    z(static_cast<Eigen::Index>(i)) = cplx(r[1], r.size() > 2 ? r[2] : 0.0);
  }
  return CollimatedCoherentProfile(grid_from_nodes(k, 0.0), std::move(z));
}

namespace {

void require_static(const DetectorConfig& det, const char* what) {
  if (!std::holds_alternative<StaticEmbedding>(det.embedding)) {
    std::ostringstream msg;
    msg << what << ": only static detectors are supported";
    throw ValidationError(msg.str());
  }
}

// a_i = mu_i zeta_i e^{-i theta_i}
Eigen::VectorXcd amplitudes(const CollimatedCoherentProfile& z, double tau, double q) {
  const auto& g = z.grid();
  Eigen::VectorXcd a(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double theta = g.energies()(i) * tau - g.nodes()(i) * q;
    a(i) = g.measure_weights()(i) * z.zeta()(i) * std::polar(1.0, -theta);
  }
  return a;
}

}  // namespace

double photo_background(const DetectorConfig& det, Diagnostics* diag) {
  validate(det);
  auto [lo, hi] = spectral_support(det.degradation, det.sigma);
  lo = std::max(lo, 0.0);
  if (!(hi > lo)) return 0.0;
  auto integrate = [&](int panels) {
    const QuadratureRule& rule = gauss_legendre(16);
    const double h = (hi - lo) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p)
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const double k = lo + (p + 0.5) * h + 0.5 * h * rule.nodes(i);
        acc += 0.5 * h * rule.weights(i) * k * detector_spectrum(det, k, diag).real();
      }
    return acc / (4.0 * kPi * kPi);
  };
  const Estimate e = refine_by_doubling(integrate, 64);
  if (diag && e.error > 1e-6 * std::abs(e.value)) {
    std::ostringstream msg;
    msg << "background integral not converged (estimated error " << e.error << ")";
    diag->warn("background-convergence", msg.str());
  }
  return e.value;
}

PhotoEvaluator::PhotoEvaluator(CollimatedCoherentProfile z, DetectorConfig det, Diagnostics* diag)
    : z_(std::move(z)), det_(std::move(det)) {
  validate(det_);
  require_static(det_, "photodetection");
  const auto& w = z_.grid().energies();
  const Eigen::Index n = w.size();
  co_.resize(n, n);
  counter_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double ww = w(i) * w(j);
      co_(i, j) = co_(j, i) = ww * detector_spectrum(det_, 0.5 * (w(i) + w(j)), diag);
      // eta~ at -x is the conjugate of eta~ at x for a Hermitian window.
      const cplx c = ww * detector_spectrum(det_, 0.5 * (w(i) - w(j)), diag);
      counter_(i, j) = c;
      counter_(j, i) = std::conj(c);
    }
  if (!co_.allFinite() || !counter_.allFinite())
    throw NumericalError("photodetection: non-finite pair kernel");
  p0_ = photo_background(det_, diag);
}

double PhotoEvaluator::p1(double tau, double q) const { return terms(tau, q).p1; }

PhotoTerms PhotoEvaluator::terms(double tau, double q) const {
  const Eigen::VectorXcd a = amplitudes(z_, tau, q);
  const Eigen::Index n = a.size();
  cplx acc{0.0, 0.0};
  double abs_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx t = a(i) * std::conj(a(j)) * co_(i, j);
      acc += t;
      abs_sum += std::abs(t);
    }
  PhotoTerms out;
  out.imag_residue = abs_sum > 0.0 ? std::abs(acc.imag()) / abs_sum : 0.0;
  if (out.imag_residue > 1e-8) {
    std::ostringstream msg;
    msg << "photodetection: co-rotating sum has imaginary residue " << out.imag_residue;
    throw NumericalError(msg.str());
  }
  out.p0 = p0_;
  out.p1 = 2.0 * acc.real();
  out.p2 = p2(tau, q);
  return out;
}

double PhotoEvaluator::p2_smeared(double tau, double q, double window_sigma, double window_delta) const {
  if (!(window_sigma >= 0.0) || !(window_delta >= 0.0))
    throw ValidationError("p2_smeared: window widths must be >= 0");
  const Eigen::VectorXcd a = amplitudes(z_, tau, q);
  const auto& k = z_.grid().nodes();
  const auto& w = z_.grid().energies();
  const Eigen::Index n = a.size();
  const double s2 = window_sigma * window_sigma, d2 = window_delta * window_delta;
  cplx acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double ks = k(i) + k(j), ws = w(i) + w(j);
      const double damp = std::exp(-0.5 * (ks * ks * d2 + ws * ws * s2));
      acc += a(i) * a(j) * counter_(i, j) * damp;
    }
  return -2.0 * acc.real();
}

PhotoTerms photo_terms_collimated(const CollimatedCoherentProfile& z, const DetectorConfig& det,
                                  double tau, double q, Diagnostics* diag) {
  return PhotoEvaluator(z, det, diag).terms(tau, q);
}

double gaussian_pulse_p1_closed(const CoherentPulse& p, double eta0, double tau, const Vec3& q,
                                Diagnostics* diag) {
  validate(p);
  const double k = p.k0.norm();
  if (diag && p.delta > 0.2 * k) {
    std::ostringstream msg;
    msg << "Delta / |k0| = " << p.delta / k << " exceeds 0.2; the saddle point is unreliable";
    diag->warn("pulse-width-ratio", msg.str());
  }
  const Vec3 r = q - (p.k0 / k) * tau;
  return 0.5 * p.zeta0.squaredNorm() * eta0 * std::exp(-p.delta * p.delta * r.squaredNorm());
}

double pulse_s_integral(const DetectorConfig& det, double delta) {
  validate(det);
  if (!(delta > 0.0)) throw ValidationError("pulse_s_integral: delta must be > 0");
  const double w = std::min(window_halfwidth(det.degradation, det.sigma), 8.0 / delta);
  auto integrate = [&](int panels) {
    const QuadratureRule& rule = gauss_legendre(16);
    const double h = 2.0 * w / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p)
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const double s = -w + (p + 0.5) * h + 0.5 * h * rule.nodes(i);
        acc += 0.5 * h * rule.weights(i) * effective_window(det.degradation, det.sigma, s).real() *
               std::exp(-delta * delta * s * s);
      }
    return acc;
  };
  return refine_by_doubling(integrate, 64).value;
}

double gaussian_pulse_p2_closed(const CoherentPulse& p, double s_integral, double tau, const Vec3& q) {
  validate(p);
  const cplx sq = p.zeta0(0) * p.zeta0(0) + p.zeta0(1) * p.zeta0(1) + p.zeta0(2) * p.zeta0(2);
  const double phase = p.k0.dot(q) - p.k0.norm() * tau;
  return -0.5 * (sq * std::polar(1.0, phase)).real() * s_integral;
}

double counter_rotating_suppression(double sigma, double delta, double k0) {
  if (!(sigma >= 0.0) || !(delta >= 0.0) || !std::isfinite(k0))
    throw ValidationError("counter_rotating_suppression: sigma and delta must be >= 0");
  return std::exp(-(delta * delta + sigma * sigma) * k0 * k0);
}

double glauber_density(const CollimatedCoherentProfile& z, double tau, double q) {
  const Eigen::VectorXcd a = amplitudes(z, tau, q);
  return 2.0 * std::norm((a.array() * z.grid().energies().array().cast<cplx>()).sum());
}

double incoherent_scale(double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("incoherent_scale: sigma must be > 0");
  return std::sqrt(8.0 * kPi) * sigma;
}

}  // namespace rqdet
