#include "rqdet/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <mutex>

#include <unsupported/Eigen/FFT>

namespace rqdet {

std::string to_string(QuadratureScheme scheme) {
  return scheme == QuadratureScheme::trapezoid ? "trapezoid" : "gauss-legendre";
}

QuadratureScheme quadrature_scheme_from_string(const std::string& name) {
  if (name == "trapezoid") return QuadratureScheme::trapezoid;
  if (name == "gauss-legendre" || name == "gauss_legendre") return QuadratureScheme::gauss_legendre;
  throw ValidationError("unknown quadrature scheme '" + name + "'");
}

namespace {

QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  if (n == 1) {
    rule.nodes(0) = 0.0;
    rule.weights(0) = 2.0;
    return rule;
  }
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(i) = -x;
    rule.nodes(n - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  if (n < 1) throw ValidationError("gauss_legendre: n must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(compute_gauss_legendre(n));
  return *slot;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  const QuadratureRule& ref = gauss_legendre(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  return {(mid + half * ref.nodes.array()).matrix(), half * ref.weights};
}

MomentumGrid::MomentumGrid(Eigen::VectorXd nodes, Eigen::VectorXd raw_weights, double mass,
                           QuadratureScheme scheme) {
  if (nodes.size() < 1) throw ValidationError("momentum grid: no nodes");
  if (nodes.size() != raw_weights.size())
    throw ValidationError("momentum grid: nodes and weights differ in length");
  if (!(mass >= 0.0) || !std::isfinite(mass))
    throw ValidationError("momentum grid: mass must be finite and >= 0");
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    if (!std::isfinite(nodes(i)) || !std::isfinite(raw_weights(i)))
      throw ValidationError("momentum grid: non-finite node or weight");
    if (!(raw_weights(i) > 0.0)) throw ValidationError("momentum grid: weights must be positive");
    if (i > 0 && !(nodes(i) > nodes(i - 1)))
      throw ValidationError("momentum grid: nodes must be strictly increasing");
  }
  Data d;
  d.energies = (nodes.array().square() + mass * mass).sqrt().matrix();
  // A massless grid may contain k = 0; its measure weight is +inf and any
  // state or sum touching it is rejected downstream.
  d.measure_weights = (raw_weights.array() / (4.0 * kPi * d.energies.array())).matrix();
  d.nodes = std::move(nodes);
  d.raw_weights = std::move(raw_weights);
  d.mass = mass;
  d.scheme = scheme;
  data_ = std::make_shared<const Data>(std::move(d));
}

bool MomentumGrid::same_as(const MomentumGrid& other) const {
  if (data_ == other.data_) return true;
  return data_->mass == other.data_->mass && data_->nodes == other.data_->nodes &&
         data_->raw_weights == other.data_->raw_weights;
}

MomentumGrid build_grid(double k_min, double k_max, int n, QuadratureScheme scheme, double mass) {
  if (n < 2) throw ValidationError("build_grid: n must be >= 2");
  if (!std::isfinite(k_min) || !std::isfinite(k_max) || !(k_min < k_max))
    throw ValidationError("build_grid: require finite k_min < k_max");
  if (!(mass >= 0.0)) throw ValidationError("build_grid: mass must be >= 0");
  Eigen::VectorXd nodes(n);
  Eigen::VectorXd weights(n);
  if (scheme == QuadratureScheme::trapezoid) {
    const double h = (k_max - k_min) / (n - 1);
    for (int i = 0; i < n; ++i) {
      nodes(i) = (i == n - 1) ? k_max : k_min + i * h;
      weights(i) = (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
  } else {
    QuadratureRule rule = gauss_legendre(n, k_min, k_max);
    nodes = std::move(rule.nodes);
    weights = std::move(rule.weights);
  }
  return MomentumGrid(std::move(nodes), std::move(weights), mass, scheme);
}

MomentumGrid grid_from_nodes(Eigen::VectorXd nodes, double mass) {
  const Eigen::Index n = nodes.size();
  if (n < 2) throw ValidationError("grid_from_nodes: need at least two nodes");
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = nodes(i + 1) - nodes(i);
    if (!(h > 0.0)) throw ValidationError("grid_from_nodes: nodes must be strictly increasing");
    weights(i) += 0.5 * h;
    weights(i + 1) += 0.5 * h;
  }
  return MomentumGrid(std::move(nodes), std::move(weights), mass, QuadratureScheme::trapezoid);
}

MomentumGrid merge_grids(const MomentumGrid& a, const MomentumGrid& b) {
  if (a.mass() != b.mass()) throw ValidationError("merge_grids: grids have different masses");
  if (!(a.k_max() < b.k_min())) throw ValidationError("merge_grids: grids overlap");
  Eigen::VectorXd nodes(a.size() + b.size());
  Eigen::VectorXd weights(a.size() + b.size());
  nodes << a.nodes(), b.nodes();
  weights << a.raw_weights(), b.raw_weights();
  const auto scheme = (a.scheme() == b.scheme()) ? a.scheme() : QuadratureScheme::trapezoid;
  return MomentumGrid(std::move(nodes), std::move(weights), a.mass(), scheme);
}

ComplexKernelMatrix::ComplexKernelMatrix(MomentumGrid grid, Eigen::MatrixXcd entries)
    : grid_(std::move(grid)), entries_(std::move(entries)) {
  if (entries_.rows() != grid_.size() || entries_.cols() != grid_.size())
    throw ValidationError("kernel matrix: dimension does not match grid size");
}

SumResult separable_double_sum(const ComplexKernelMatrix& rho, const Eigen::MatrixXcd& kernel,
                               const Eigen::VectorXd& theta) {
  const auto& mu = rho.grid().measure_weights();
  const Eigen::Index n = rho.grid().size();
  if (kernel.rows() != n || kernel.cols() != n || theta.size() != n)
    throw ValidationError("separable_double_sum: dimension mismatch");
  Eigen::VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(theta(i))) {
      std::ostringstream msg;
      msg << "double_sum: non-finite phase at node " << i;
      throw NumericalError(msg.str());
    }
    x(i) = mu(i) * std::polar(1.0, theta(i));
  }
  const Eigen::MatrixXcd& r = rho.entries();
  SumResult out{cplx{0.0, 0.0}, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx row{0.0, 0.0};
    double row_abs = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx term = x(i) * std::conj(x(j)) * r(j, i) * kernel(i, j);
      row += term;
      row_abs += std::abs(term);
    }
    out.value += row;
    out.abs_sum += row_abs;
  }
  if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag())) {
    // Locate the first offending pair for the message.
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (!std::isfinite(std::abs(kernel(i, j)))) {
          std::ostringstream msg;
          msg << "double_sum: non-finite integrand at node pair (" << i << ", " << j << ")";
          throw NumericalError(msg.str());
        }
    throw NumericalError("double_sum: non-finite result");
  }
  return out;
}

bool is_uniform(const Eigen::VectorXd& values, double rel_tol) {
  const Eigen::Index m = values.size();
  if (m < 2) return true;
  const double step = (values(m - 1) - values(0)) / static_cast<double>(m - 1);
  if (!(step != 0.0)) return false;
  const double scale = std::max({std::abs(values(0)), std::abs(values(m - 1)), std::abs(step)});
  for (Eigen::Index i = 0; i < m; ++i)
    if (std::abs(values(i) - (values(0) + step * static_cast<double>(i))) > rel_tol * scale * 4.0)
      return false;
  return true;
}

Eigen::VectorXcd nufft_type1(const Eigen::VectorXcd& c, const Eigen::VectorXd& x, Eigen::Index m) {
  if (m < 2 || m % 2 != 0) throw ValidationError("nufft_type1: output size must be even and >= 2");
  if (c.size() != x.size()) throw ValidationError("nufft_type1: size mismatch");
  constexpr int kSpread = 12;
  constexpr double kOversample = 2.0;
  const Eigen::Index mr = static_cast<Eigen::Index>(kOversample) * m;
  const double tau = kPi * kSpread / (static_cast<double>(m) * m * kOversample * (kOversample - 0.5));
  const double h = 2.0 * kPi / static_cast<double>(mr);

  std::vector<cplx> fine(static_cast<std::size_t>(mr), cplx{0.0, 0.0});
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    double xi = std::fmod(x(i), 2.0 * kPi);
    if (xi < 0.0) xi += 2.0 * kPi;
    const auto m0 = static_cast<Eigen::Index>(std::floor(xi / h));
    for (Eigen::Index l = m0 - kSpread + 1; l <= m0 + kSpread; ++l) {
      const double d = xi - static_cast<double>(l) * h;
      const Eigen::Index idx = ((l % mr) + mr) % mr;
      fine[static_cast<std::size_t>(idx)] += c(i) * std::exp(-d * d / (4.0 * tau));
    }
  }
  Eigen::FFT<double> fft;
  std::vector<cplx> spectrum;
  fft.fwd(spectrum, fine);

  Eigen::VectorXcd out(m);
  const double pref = std::sqrt(kPi / tau) / static_cast<double>(mr);
  for (Eigen::Index j = -m / 2; j < m / 2; ++j) {
    const Eigen::Index idx = (j + mr) % mr;
    const double jj = static_cast<double>(j);
    out(j + m / 2) = pref * std::exp(jj * jj * tau) * spectrum[static_cast<std::size_t>(idx)];
  }
  return out;
}

namespace {

Eigen::VectorXcd amplitude_direct(const MomentumGrid& grid, const Eigen::VectorXcd& coeff,
                                  const Eigen::VectorXd& tau_grid) {
  const auto& omega = grid.energies();
  Eigen::VectorXcd out(tau_grid.size());
  for (Eigen::Index t = 0; t < tau_grid.size(); ++t) {
    cplx acc{0.0, 0.0};
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      acc += coeff(i) * std::polar(1.0, -omega(i) * tau_grid(t));
    out(t) = acc;
  }
  return out;
}

Eigen::VectorXcd amplitude_fast(const MomentumGrid& grid, const Eigen::VectorXcd& coeff,
                                const Eigen::VectorXd& tau_grid) {
  const Eigen::Index m = tau_grid.size();
  const Eigen::Index m_even = m + (m % 2);
  const double dtau = (tau_grid(m - 1) - tau_grid(0)) / static_cast<double>(m - 1);
  const double tau_c = tau_grid(0) + static_cast<double>(m_even / 2) * dtau;
  const auto& omega = grid.energies();
  Eigen::VectorXcd shifted(grid.size());
  Eigen::VectorXd x(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    shifted(i) = coeff(i) * std::polar(1.0, -omega(i) * tau_c);
    x(i) = std::fmod(omega(i) * dtau, 2.0 * kPi);
  }
  const Eigen::VectorXcd f = nufft_type1(shifted, x, m_even);
  return f.head(m);
}

}  // namespace

Eigen::VectorXcd amplitude_transform(const MomentumGrid& grid, const Eigen::VectorXcd& psi,
                                     const Eigen::VectorXcd& weight_at_nodes,
                                     const Eigen::VectorXd& tau_grid, double q, TransformPath path) {
  if (tau_grid.size() == 0) throw ValidationError("amplitude_transform: empty tau grid");
  if (psi.size() != grid.size() || weight_at_nodes.size() != grid.size())
    throw ValidationError("amplitude_transform: psi/weight size does not match grid");
  if (!tau_grid.allFinite() || !std::isfinite(q))
    throw ValidationError("amplitude_transform: non-finite tau or q");
  Eigen::VectorXcd coeff(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    coeff(i) = grid.raw_weights()(i) * weight_at_nodes(i) * psi(i) *
               std::polar(1.0, grid.nodes()(i) * q);

  const bool uniform = tau_grid.size() >= 2 && is_uniform(tau_grid);
  if (path == TransformPath::fast && !uniform)
    throw ValidationError("amplitude_transform: fast path requires a uniform tau grid");
  const bool use_fast = path == TransformPath::fast ||
                        (path == TransformPath::automatic && uniform && tau_grid.size() >= 64 &&
                         grid.size() >= 32);
  return use_fast ? amplitude_fast(grid, coeff, tau_grid) : amplitude_direct(grid, coeff, tau_grid);
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("trapezoid: size mismatch");
  if (x.size() < 2) throw ValidationError("trapezoid: need at least two samples");
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) acc += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return acc;
}

unsigned resolve_thread_count(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (requested < 0) throw ValidationError("thread count must be positive");
  if (const char* env = std::getenv("RQDET_THREADS"); env && *env) {
    int value = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc() || ptr != end || value <= 0)
      throw ValidationError(std::string("RQDET_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace rqdet
