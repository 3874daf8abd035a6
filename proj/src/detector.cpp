#include "rqdet/detector.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rqdet/csv.hpp"

namespace rqdet {

double minkowski_dot(const Vec4& a, const Vec4& b) {
  return -a(0) * b(0) + a(1) * b(1) + a(2) * b(2) + a(3) * b(3);
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw ValidationError("spline: need at least two matching samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw ValidationError("spline: knots must be strictly increasing");
  m_.assign(n, 0.0);
  if (n < 3) return;
  // Tridiagonal system for interior second derivatives (natural ends).
  std::vector<double> c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1];
    const double h1 = x_[i + 1] - x_[i];
    const double a = h0 / 6.0;
    const double b = (h0 + h1) / 3.0;
    const double cc = h1 / 6.0;
    const double rhs = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    const double denom = b - a * c[i - 1];
    c[i] = cc / denom;
    d[i] = (rhs - a * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = d[i] - c[i] * m_[i + 1];
    if (i == 1) break;
  }
}

std::size_t CubicSpline::segment(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(i, x_.size() - 2);
}

double CubicSpline::operator()(double x) const {
  const std::size_t i = segment(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double x) const {
  const std::size_t i = segment(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return (y_[i + 1] - y_[i]) / h +
         (-(3.0 * a * a - 1.0) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

TabulatedEmbedding::TabulatedEmbedding(const std::vector<double>& tau, const std::vector<Vec4>& points) {
  if (tau.size() != points.size() || tau.size() < 2)
    throw ValidationError("tabulated worldline: need at least two (tau, t, x, y, z) rows");
  for (int mu = 0; mu < 4; ++mu) {
    std::vector<double> y(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) y[i] = points[i](mu);
    coord_[mu] = CubicSpline(tau, y);
  }
  for (double t : tau) {
    const Vec4 v = tangent(t);
    if (!(minkowski_dot(v, v) < 0.0) || !(v(0) > 0.0))
      throw ValidationError("tabulated worldline is not future timelike at tau = " + std::to_string(t));
  }
}

void TabulatedEmbedding::check_range(double tau) const {
  const double slack = 1e-12 * std::max(1.0, tau_max() - tau_min());
  if (!(tau >= tau_min() - slack && tau <= tau_max() + slack)) {
    std::ostringstream msg;
    msg << "tau = " << tau << " outside tabulated worldline range [" << tau_min() << ", "
        << tau_max() << "]";
    throw ValidationError(msg.str());
  }
}

Vec4 TabulatedEmbedding::point(double tau) const {
  check_range(tau);
  return {coord_[0](tau), coord_[1](tau), coord_[2](tau), coord_[3](tau)};
}

Vec4 TabulatedEmbedding::tangent(double tau) const {
  check_range(tau);
  return {coord_[0].derivative(tau), coord_[1].derivative(tau), coord_[2].derivative(tau),
          coord_[3].derivative(tau)};
}

TabulatedEmbedding load_worldline_csv(std::istream& in) {
  const CsvTable table = read_numeric_csv(in, 5, 5);
  std::vector<double> tau;
  std::vector<Vec4> pts;
  for (const auto& row : table.rows) {
    tau.push_back(row[0]);
    pts.emplace_back(row[1], row[2], row[3], row[4]);
  }
  return TabulatedEmbedding(tau, pts);
}

TabulatedEmbedding load_worldline_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open worldline file '" + path + "'");
  return load_worldline_csv(in);
}

std::string embedding_kind(const Embedding& e) {
  struct {
    std::string operator()(const StaticEmbedding&) const { return "static"; }
    std::string operator()(const InertialEmbedding&) const { return "inertial"; }
    std::string operator()(const UniformAccelerationEmbedding&) const { return "uniform-acceleration"; }
    std::string operator()(const TabulatedEmbedding&) const { return "tabulated"; }
  } visitor;
  return std::visit(visitor, e);
}

void validate_embedding(const Embedding& e) {
  if (const auto* in = std::get_if<InertialEmbedding>(&e)) {
    if (!in->velocity.allFinite() || !(in->velocity.norm() < 1.0))
      throw ValidationError("inertial embedding: |v| must be < 1");
  } else if (const auto* ua = std::get_if<UniformAccelerationEmbedding>(&e)) {
    if (!(ua->acceleration > 0.0) || !std::isfinite(ua->acceleration))
      throw ValidationError("uniform-acceleration embedding: a must be > 0");
  }
}

Vec4 embedding_point(const Embedding& e, double tau, const Vec3& q) {
  if (!std::isfinite(tau)) throw ValidationError("embedding_point: non-finite tau");
  if (std::holds_alternative<StaticEmbedding>(e)) return {tau, q(0), q(1), q(2)};
  if (const auto* in = std::get_if<InertialEmbedding>(&e)) {
    const double gamma = 1.0 / std::sqrt(1.0 - in->velocity.squaredNorm());
    const Vec3 x = q + gamma * tau * in->velocity;
    return {gamma * tau, x(0), x(1), x(2)};
  }
  if (const auto* ua = std::get_if<UniformAccelerationEmbedding>(&e)) {
    const double a = ua->acceleration;
    return {std::sinh(a * tau) / a, q(0) + (std::cosh(a * tau) - 1.0) / a, q(1), q(2)};
  }
  const auto& tab = std::get<TabulatedEmbedding>(e);
  return tab.point(tau) + Vec4(0.0, q(0), q(1), q(2));
}

Vec4 four_velocity(const Embedding& e, double tau) {
  if (!std::isfinite(tau)) throw ValidationError("four_velocity: non-finite tau");
  if (std::holds_alternative<StaticEmbedding>(e)) return {1.0, 0.0, 0.0, 0.0};
  if (const auto* in = std::get_if<InertialEmbedding>(&e)) {
    const double gamma = 1.0 / std::sqrt(1.0 - in->velocity.squaredNorm());
    return {gamma, gamma * in->velocity(0), gamma * in->velocity(1), gamma * in->velocity(2)};
  }
  if (const auto* ua = std::get_if<UniformAccelerationEmbedding>(&e)) {
    const double a = ua->acceleration;
    return {std::cosh(a * tau), std::sinh(a * tau), 0.0, 0.0};
  }
  // Spline tangents are only approximately unit; renormalize.
  const Vec4 v = std::get<TabulatedEmbedding>(e).tangent(tau);
  return v / std::sqrt(-minkowski_dot(v, v));
}

double proper_acceleration(const Embedding& e, double tau) {
  if (std::holds_alternative<StaticEmbedding>(e) || std::holds_alternative<InertialEmbedding>(e))
    return 0.0;
  if (const auto* ua = std::get_if<UniformAccelerationEmbedding>(&e)) return ua->acceleration;
  const auto& tab = std::get<TabulatedEmbedding>(e);
  const double h = 1e-5 * std::max(1.0, tab.tau_max() - tab.tau_min());
  const double lo = std::max(tab.tau_min(), tau - h);
  const double hi = std::min(tab.tau_max(), tau + h);
  const Vec4 a = (four_velocity(e, hi) - four_velocity(e, lo)) / (hi - lo);
  return std::sqrt(std::max(0.0, minkowski_dot(a, a)));
}

bool has_constant_velocity(const Embedding& e) {
  return std::holds_alternative<StaticEmbedding>(e) || std::holds_alternative<InertialEmbedding>(e);
}

TabulatedDegradation::TabulatedDegradation(double s0, double ds, std::vector<cplx> values)
    : s0_(s0), ds_(ds), values_(std::move(values)) {
  if (values_.size() < 2) throw ValidationError("tabulated degradation: need at least two samples");
  if (!(ds_ > 0.0) || !std::isfinite(s0_)) throw ValidationError("tabulated degradation: bad spacing");
  const double zero_pos = -s0_ / ds_;
  const double zero_idx = std::round(zero_pos);
  if (std::abs(zero_pos - zero_idx) > 1e-9 || zero_idx < 0 ||
      zero_idx > static_cast<double>(values_.size() - 1))
    throw ValidationError("tabulated degradation: s = 0 must be one of the samples");
  const cplx at_zero = values_[static_cast<std::size_t>(zero_idx)];
  if (std::abs(at_zero) == 0.0) throw ValidationError("tabulated degradation: eta(0) = 0");
  for (auto& v : values_) {
    v /= at_zero;
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw ValidationError("tabulated degradation: non-finite sample");
    if (std::abs(v) > 1.0 + 1e-12)
      throw ValidationError("tabulated degradation: |eta(s)| exceeds eta(0)");
  }
  values_[static_cast<std::size_t>(zero_idx)] = 1.0;
  s0_ = -zero_idx * ds_;
}

cplx TabulatedDegradation::operator()(double s) const {
  const double pos = (s - s0_) / ds_;
  if (pos < 0.0 || pos > static_cast<double>(values_.size() - 1)) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * values_[i] + t * values_[i + 1];
}

TabulatedDegradation load_degradation_csv(std::istream& in) {
  const CsvTable table = read_numeric_csv(in, 2, 3);
  if (table.rows.size() < 2) throw ValidationError("degradation table: need at least two rows");
  std::vector<cplx> values;
  const double s0 = table.rows.front()[0];
  const double ds = table.rows[1][0] - s0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const double expected = s0 + ds * static_cast<double>(i);
    if (std::abs(row[0] - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
      throw ValidationError("degradation table: s column must be uniformly spaced (row " +
                            std::to_string(i + 1) + ")");
    values.emplace_back(row[1], row.size() > 2 ? row[2] : 0.0);
  }
  return TabulatedDegradation(s0, ds, std::move(values));
}

TabulatedDegradation load_degradation_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open degradation file '" + path + "'");
  return load_degradation_csv(in);
}

namespace {

// Composite rule on [0, b] in t with omega = m + t^2, which removes the
// square-root threshold behaviour of the spectrum.
template <class F>
cplx threshold_integral(F&& f, double mass, double omega_max, int panels) {
  const double tmax = std::sqrt(omega_max - mass);
  const QuadratureRule& rule = gauss_legendre(16);
  const double h = tmax / panels;
  cplx acc{0.0, 0.0};
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
      const double t = mid + 0.5 * h * rule.nodes(q);
      acc += 0.5 * h * rule.weights(q) * 2.0 * t * f(mass + t * t);
    }
  }
  return acc;
}

}  // namespace

AbsorptionDegradation::AbsorptionDegradation(std::function<double(double)> alpha, double mass,
                                             double omega_max)
    : alpha_(std::move(alpha)), mass_(mass), omega_max_(omega_max) {
  if (!alpha_) throw ValidationError("absorption degradation: alpha is empty");
  if (!(mass_ >= 0.0) || !std::isfinite(mass_)) throw ValidationError("absorption degradation: bad mass");
  if (!(omega_max_ > mass_) || !std::isfinite(omega_max_))
    throw ValidationError("absorption degradation: omega_max must exceed the mass");
  norm_ = 1.0;
  const double total = threshold_integral([&](double w) { return spectrum(w); }, mass_, omega_max_, 64).real();
  if (!(total > 0.0)) throw ValidationError("absorption degradation: alpha integrates to zero");
  norm_ = 2.0 * kPi / total;
}

double AbsorptionDegradation::spectrum(double omega) const {
  if (omega < mass_ || omega > omega_max_) return 0.0;
  const double a = alpha_(omega);
  if (!(a >= 0.0)) throw ValidationError("absorption coefficient must be >= 0");
  return norm_ * a * std::sqrt(omega * omega - mass_ * mass_);
}

cplx AbsorptionDegradation::eta(double s) const {
  const double osc = (omega_max_ - mass_) * std::abs(s) / (2.0 * kPi);
  const int panels = std::max(64, static_cast<int>(std::ceil(4.0 * osc)));
  return threshold_integral([&](double w) { return spectrum(w) * std::polar(1.0, -w * s); }, mass_,
                            omega_max_, panels) /
         (2.0 * kPi);
}

std::string degradation_kind(const DegradationFunction& d) {
  struct {
    std::string operator()(const GaussianEnergyDegradation&) const { return "gaussian-energy"; }
    std::string operator()(const DiffusionDegradation&) const { return "diffusion"; }
    std::string operator()(const GaussianDegradation&) const { return "gaussian-simple"; }
    std::string operator()(const TabulatedDegradation&) const { return "tabulated"; }
    std::string operator()(const AbsorptionDegradation&) const { return "from-absorption"; }
  } visitor;
  return std::visit(visitor, d);
}

void validate_degradation(const DegradationFunction& d) {
  if (const auto* g = std::get_if<GaussianEnergyDegradation>(&d)) {
    if (!std::isfinite(g->energy)) throw ValidationError("gaussian-energy: E must be finite");
    if (!(g->heat_capacity >= 0.0) || !std::isfinite(g->heat_capacity))
      throw ValidationError("gaussian-energy: C must be >= 0");
    if (!(g->temperature > 0.0) || !std::isfinite(g->temperature))
      throw ValidationError("gaussian-energy: T must be > 0");
  } else if (const auto* df = std::get_if<DiffusionDegradation>(&d)) {
    if (!(df->diffusion > 0.0) || !std::isfinite(df->diffusion))
      throw ValidationError("diffusion: D must be > 0");
    if (!(df->record_size > 0.0) || !std::isfinite(df->record_size))
      throw ValidationError("diffusion: delta must be > 0");
  } else if (const auto* gs = std::get_if<GaussianDegradation>(&d)) {
    if (!(gs->decay_time > 0.0) || !std::isfinite(gs->decay_time))
      throw ValidationError("gaussian-simple: tau_d must be > 0");
  }
}

cplx eval_eta(const DegradationFunction& d, double s) {
  if (!std::isfinite(s)) throw ValidationError("eval_eta: non-finite s");
  if (const auto* g = std::get_if<GaussianEnergyDegradation>(&d)) {
    const double c = g->heat_capacity * g->temperature * g->temperature;
    return std::polar(std::exp(-0.5 * c * s * s), -g->energy * s);
  }
  if (const auto* df = std::get_if<DiffusionDegradation>(&d)) {
    const double r = df->record_size;
    return std::pow(1.0 + df->diffusion * std::abs(s) / (r * r), -0.75);
  }
  if (const auto* gs = std::get_if<GaussianDegradation>(&d)) {
    const double t = s / gs->decay_time;
    return std::exp(-0.5 * t * t);
  }
  if (const auto* tab = std::get_if<TabulatedDegradation>(&d)) return (*tab)(s);
  return std::get<AbsorptionDegradation>(d).eta(s);
}

double decay_time(const DegradationFunction& d) {
  if (const auto* g = std::get_if<GaussianEnergyDegradation>(&d)) {
    const double c = g->heat_capacity * g->temperature * g->temperature;
    return c > 0.0 ? 1.0 / std::sqrt(c) : kInfinity;
  }
  if (const auto* df = std::get_if<DiffusionDegradation>(&d))
    return df->record_size * df->record_size / df->diffusion;
  if (const auto* gs = std::get_if<GaussianDegradation>(&d)) return gs->decay_time;
  if (const auto* tab = std::get_if<TabulatedDegradation>(&d))
    return std::max(std::abs(tab->s_min()), std::abs(tab->s_max()));
  const auto& ab = std::get<AbsorptionDegradation>(d);
  return 2.0 * kPi / (ab.omega_max() - ab.mass());
}

double coarse_graining_window(double sigma, double s) {
  if (std::isinf(sigma)) return 1.0;
  return std::exp(-s * s / (8.0 * sigma * sigma));
}

cplx effective_window(const DegradationFunction& d, double sigma, double s) {
  return coarse_graining_window(sigma, s) * eval_eta(d, s);
}

namespace {

// Exponent a of the Gaussian effective window exp(-a s^2) (times a phase).
double gaussian_exponent(const DegradationFunction& d, double sigma) {
  const double window = std::isinf(sigma) ? 0.0 : 1.0 / (8.0 * sigma * sigma);
  if (const auto* g = std::get_if<GaussianEnergyDegradation>(&d))
    return 0.5 * g->heat_capacity * g->temperature * g->temperature + window;
  const auto& gs = std::get<GaussianDegradation>(d);
  return 0.5 / (gs.decay_time * gs.decay_time) + window;
}

double gaussian_center(const DegradationFunction& d) {
  if (const auto* g = std::get_if<GaussianEnergyDegradation>(&d)) return g->energy;
  return 0.0;
}

// e^{-28} ~ 7e-13, below the endpoint tolerance.
constexpr double kTailExponent = 28.0;

}  // namespace

bool has_analytic_transform(const DegradationFunction& d) {
  return std::holds_alternative<GaussianEnergyDegradation>(d) ||
         std::holds_alternative<GaussianDegradation>(d);
}

double window_halfwidth(const DegradationFunction& d, double sigma) {
  if (has_analytic_transform(d)) {
    const double a = gaussian_exponent(d, sigma);
    return a > 0.0 ? std::sqrt(kTailExponent / a) : kInfinity;
  }
  const double from_sigma = std::isinf(sigma) ? kInfinity : 15.0 * sigma;
  if (const auto* tab = std::get_if<TabulatedDegradation>(&d))
    return std::min(from_sigma, std::max(std::abs(tab->s_min()), std::abs(tab->s_max())));
  if (std::isinf(from_sigma)) return 15.0 * decay_time(d);
  return from_sigma;
}

std::pair<double, double> spectral_support(const DegradationFunction& d, double sigma) {
  if (has_analytic_transform(d)) {
    const double half = std::sqrt(4.0 * kTailExponent * gaussian_exponent(d, sigma));
    const double c = gaussian_center(d);
    return {c - half, c + half};
  }
  const double smear = std::isinf(sigma) ? 0.0 : 6.0 / sigma;
  if (const auto* ab = std::get_if<AbsorptionDegradation>(&d))
    return {ab->mass() - smear, ab->omega_max() + smear};
  if (const auto* tab = std::get_if<TabulatedDegradation>(&d)) {
    const double nyquist = kPi / tab->spacing();
    return {-nyquist, nyquist};
  }
  // Diffusion: algebraic tail; cover a generous multiple of the inverse scales.
  const double half = 10.0 * (smear + 100.0 / decay_time(d));
  return {-half, half};
}

namespace {

// Panels on [0, W]: geometric refinement towards s = 0 starting at `scale`,
// then uniform panels no wider than `hmax`.
std::vector<double> graded_breaks(double w, double scale, double hmax) {
  std::vector<double> breaks{0.0};
  double h = std::min(scale / 8.0, hmax);
  double s = 0.0;
  while (s < w) {
    s = std::min(w, s + h);
    breaks.push_back(s);
    h = std::min(2.0 * h, hmax);
  }
  return breaks;
}

template <class F>
cplx panel_fourier(F&& f, double omega, const std::vector<double>& breaks, double sign, int order) {
  cplx acc{0.0, 0.0};
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = sign * breaks[p];
    const double b = sign * breaks[p + 1];
    acc += fourier_integral(f, omega, std::min(a, b), std::max(a, b), 1, order);
  }
  return acc;
}

}  // namespace

FourierResult eta_tilde(const DegradationFunction& d, double sigma, double omega) {
  if (!std::isfinite(omega)) throw ValidationError("eta_tilde: omega must be finite");
  if (!(sigma > 0.0)) throw ValidationError("eta_tilde: sigma must be > 0");
  if (has_analytic_transform(d)) {
    const double a = gaussian_exponent(d, sigma);
    if (!(a > 0.0))
      throw ValidationError("eta_tilde: effective window does not decay (C = 0 and sigma = inf)");
    const double nu = omega - gaussian_center(d);
    return {std::sqrt(kPi / a) * std::exp(-nu * nu / (4.0 * a)), 0.0, false};
  }
  if (const auto* ab = std::get_if<AbsorptionDegradation>(&d)) {
    if (std::isinf(sigma)) return {ab->spectrum(omega), 0.0, false};
    // Convolution with the transform of g_sigma, sqrt(8 pi) sigma e^{-2 sigma^2 nu^2}.
    const double reach = 5.0 / sigma;
    const double lo = std::max(ab->mass(), omega - reach);
    const double hi = std::min(ab->omega_max(), omega + reach);
    if (!(hi > lo)) return {0.0, 0.0, false};
    const QuadratureRule& rule = gauss_legendre(16);
    const int panels = 32;
    const double tlo = std::sqrt(lo - ab->mass());
    const double thi = std::sqrt(hi - ab->mass());
    const double h = (thi - tlo) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double mid = tlo + (p + 0.5) * h;
      for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
        const double t = mid + 0.5 * h * rule.nodes(q);
        const double w = ab->mass() + t * t;
        const double nu = omega - w;
        acc += 0.5 * h * rule.weights(q) * 2.0 * t * ab->spectrum(w) *
               std::exp(-2.0 * sigma * sigma * nu * nu);
      }
    }
    return {acc * std::sqrt(8.0 * kPi) * sigma / (2.0 * kPi), 0.0, false};
  }

  auto f = [&](double s) { return effective_window(d, sigma, s); };
  FourierResult out;
  if (const auto* tab = std::get_if<TabulatedDegradation>(&d)) {
    // Panels aligned with the samples so each piece is linear times g_sigma.
    const double w = window_halfwidth(d, sigma);
    const double ds = tab->spacing();
    const double lo = std::max(tab->s_min(), -std::ceil(w / ds) * ds);
    const double hi = std::min(tab->s_max(), std::ceil(w / ds) * ds);
    const int panels = static_cast<int>(std::lround((hi - lo) / ds));
    out.value = fourier_integral(f, omega, lo, hi, panels, 6);
    out.endpoint_magnitude = std::max(std::abs(f(lo)), std::abs(f(hi)));
  } else {
    const double w = window_halfwidth(d, sigma);
    const double scale = std::min(decay_time(d), std::isinf(sigma) ? kInfinity : sigma);
    double hmax = std::min(w / 16.0, scale);
    if (omega != 0.0) hmax = std::min(hmax, kPi / std::abs(omega));
    const auto breaks = graded_breaks(w, scale, hmax);
    out.value = panel_fourier(f, omega, breaks, 1.0, 16) + panel_fourier(f, omega, breaks, -1.0, 16);
    out.endpoint_magnitude = std::max(std::abs(f(w)), std::abs(f(-w)));
  }
  out.flagged = out.endpoint_magnitude > kFourierEndpointTolerance;
  return out;
}

double eta_tilde_from_absorption(const std::function<double(double)>& alpha, double mass,
                                 double omega) {
  if (!std::isfinite(omega) || omega < mass) {
    std::ostringstream msg;
    msg << "eta_tilde_from_absorption: omega = " << omega << " is below the threshold m = " << mass;
    throw ValidationError(msg.str());
  }
  const double a = alpha(omega);
  if (!(a >= 0.0)) throw ValidationError("eta_tilde_from_absorption: alpha must be >= 0");
  return a * std::sqrt(omega * omega - mass * mass);
}

void validate(const DetectorConfig& det) {
  if (!(det.sigma > 0.0)) throw ValidationError("detector: sigma must be > 0");
  if (!(det.delta > 0.0) || !std::isfinite(det.delta))
    throw ValidationError("detector: delta must be > 0 and finite");
  validate_embedding(det.embedding);
  validate_degradation(det.degradation);
}

Diagnostics advisories(const DetectorConfig& det) {
  Diagnostics diag;
  if (det.sigma < 10.0 * det.delta) {
    std::ostringstream msg;
    msg << "sigma/delta = " << det.sigma / det.delta
        << " is below 10; the model assumes sigma >> delta";
    diag.warn("sigma-delta-ratio", msg.str());
  }
  return diag;
}

cplx detector_spectrum(const DetectorConfig& det, double omega, Diagnostics* diag) {
  const FourierResult r = eta_tilde(det.degradation, det.sigma, omega);
  if (r.flagged && diag) {
    std::ostringstream msg;
    msg << "effective window magnitude " << r.endpoint_magnitude
        << " at the Fourier window edge exceeds 1e-12";
    diag->warn("fourier-window", msg.str());
  }
  return r.value;
}

}  // namespace rqdet
