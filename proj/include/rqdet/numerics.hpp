#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rqdet/errors.hpp"

namespace rqdet {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.14159265358979323846;

enum class QuadratureScheme { trapezoid, gauss_legendre };

std::string to_string(QuadratureScheme scheme);
QuadratureScheme quadrature_scheme_from_string(const std::string& name);

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// n-point Gauss-Legendre rule on [-1, 1]. Rules are computed once per n and
/// cached; the returned reference stays valid for the lifetime of the program.
const QuadratureRule& gauss_legendre(int n);

/// n-point Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Quadrature nodes on a truncated momentum axis together with the
/// Lorentz-invariant 1-D measure dk / (2 pi * 2 omega_k).
///
/// Immutable; copies share storage.
class MomentumGrid {
 public:
  MomentumGrid(Eigen::VectorXd nodes, Eigen::VectorXd raw_weights, double mass,
               QuadratureScheme scheme);

  [[nodiscard]] const Eigen::VectorXd& nodes() const { return data_->nodes; }
  [[nodiscard]] const Eigen::VectorXd& raw_weights() const { return data_->raw_weights; }
  [[nodiscard]] const Eigen::VectorXd& measure_weights() const { return data_->measure_weights; }
  [[nodiscard]] const Eigen::VectorXd& energies() const { return data_->energies; }
  [[nodiscard]] double mass() const { return data_->mass; }
  [[nodiscard]] QuadratureScheme scheme() const { return data_->scheme; }
  [[nodiscard]] Eigen::Index size() const { return data_->nodes.size(); }
  [[nodiscard]] double k_min() const { return data_->nodes(0); }
  [[nodiscard]] double k_max() const { return data_->nodes(size() - 1); }

  [[nodiscard]] bool same_as(const MomentumGrid& other) const;

 private:
  struct Data {
    Eigen::VectorXd nodes;
    Eigen::VectorXd raw_weights;
    Eigen::VectorXd measure_weights;
    Eigen::VectorXd energies;
    double mass;
    QuadratureScheme scheme;
  };
  std::shared_ptr<const Data> data_;
};

MomentumGrid build_grid(double k_min, double k_max, int n, QuadratureScheme scheme, double mass);

/// Trapezoid weights on arbitrary strictly increasing nodes (tabulated states).
MomentumGrid grid_from_nodes(Eigen::VectorXd nodes, double mass);

/// Concatenates two grids on disjoint intervals (a.k_max() < b.k_min()).
MomentumGrid merge_grids(const MomentumGrid& a, const MomentumGrid& b);

/// Complex matrix indexed by pairs of grid nodes.
class ComplexKernelMatrix {
 public:
  ComplexKernelMatrix(MomentumGrid grid, Eigen::MatrixXcd entries);

  [[nodiscard]] const MomentumGrid& grid() const { return grid_; }
  [[nodiscard]] const Eigen::MatrixXcd& entries() const { return entries_; }
  [[nodiscard]] cplx operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

 private:
  MomentumGrid grid_;
  Eigen::MatrixXcd entries_;
};

/// Value of a double momentum sum together with sum_ij |term_ij|, the scale
/// against which rounding residues are judged.
struct SumResult {
  cplx value;
  double abs_sum = 0.0;

  /// |Im| relative to the absolute term sum.
  [[nodiscard]] double imag_residue() const {
    return abs_sum > 0.0 ? std::abs(value.imag()) / abs_sum : 0.0;
  }
};

/// sum_ij mu_i mu_j rho(j, i) kernel(k_i, k_j) exp(i phase(k_i, k_j)), with mu
/// the measure weights. The loop order is row-major (i outer) and fixed, so
/// results are bit-reproducible.
template <class Kernel, class Phase>
SumResult double_sum_detailed(const ComplexKernelMatrix& rho, Kernel&& kernel, Phase&& phase) {
  const auto& grid = rho.grid();
  const auto& k = grid.nodes();
  const auto& mu = grid.measure_weights();
  const Eigen::Index n = grid.size();
  SumResult out{cplx{0.0, 0.0}, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx row{0.0, 0.0};
    double row_abs = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx kv = kernel(k(i), k(j));
      const double ph = phase(k(i), k(j));
      if (!std::isfinite(kv.real()) || !std::isfinite(kv.imag()) || !std::isfinite(ph)) {
        std::ostringstream msg;
        msg << "double_sum: non-finite integrand at node pair (" << i << ", " << j
            << "), k = (" << k(i) << ", " << k(j) << ")";
        throw NumericalError(msg.str());
      }
      const cplx term = mu(i) * mu(j) * rho(j, i) * kv * std::polar(1.0, ph);
      row += term;
      row_abs += std::abs(term);
    }
    out.value += row;
    out.abs_sum += row_abs;
  }
  if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag()))
    throw NumericalError("double_sum: non-finite result (check measure weights and rho)");
  return out;
}

template <class Kernel, class Phase>
cplx double_sum(const ComplexKernelMatrix& rho, Kernel&& kernel, Phase&& phase) {
  return double_sum_detailed(rho, std::forward<Kernel>(kernel), std::forward<Phase>(phase)).value;
}

/// Fast path for separable phases phase(k_i, k_j) = theta_i - theta_j with a
/// precomputed pair kernel. Same summation order as double_sum.
SumResult separable_double_sum(const ComplexKernelMatrix& rho, const Eigen::MatrixXcd& kernel,
                               const Eigen::VectorXd& theta);

enum class TransformPath { automatic, direct, fast };

/// A(tau) = sum_i w_i weight(k_i) psi_i exp(-i omega_i tau + i k_i q), with w_i
/// the plain quadrature weights.
///
/// The fast path evaluates the sum on a uniform tau grid with a type-1
/// non-uniform FFT (Gaussian gridding); it agrees with direct summation to
/// ~1e-12 relative to sum_i |c_i|.
Eigen::VectorXcd amplitude_transform(const MomentumGrid& grid, const Eigen::VectorXcd& psi,
                                     const Eigen::VectorXcd& weight_at_nodes,
                                     const Eigen::VectorXd& tau_grid, double q,
                                     TransformPath path = TransformPath::automatic);

template <class Weight>
Eigen::VectorXcd amplitude_transform(const MomentumGrid& grid, const Eigen::VectorXcd& psi,
                                     Weight&& weight, const Eigen::VectorXd& tau_grid, double q,
                                     TransformPath path = TransformPath::automatic)
  requires(std::is_invocable_v<Weight, double> &&
           !std::is_base_of_v<Eigen::EigenBase<std::decay_t<Weight>>, std::decay_t<Weight>>)
{
  Eigen::VectorXcd w(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) w(i) = cplx(weight(grid.nodes()(i)));
  return amplitude_transform(grid, psi, w, tau_grid, q, path);
}

/// Type-1 NUFFT: f_j = sum_i c_i exp(-i j x_i) for j = -m/2 .. m/2 - 1, m even.
/// Exposed for testing; x may take any real values (reduced mod 2 pi).
Eigen::VectorXcd nufft_type1(const Eigen::VectorXcd& c, const Eigen::VectorXd& x, Eigen::Index m);

bool is_uniform(const Eigen::VectorXd& values, double rel_tol = 1e-12);

struct FourierResult {
  cplx value;
  double endpoint_magnitude = 0.0;
  bool flagged = false;
};

struct FourierOptions {
  /// Panels per half-window; 0 selects a count from omega and window.
  int panels = 0;
  int order = 20;
};

inline constexpr double kFourierEndpointTolerance = 1e-12;

/// int_{a}^{b} ds e^{i omega s} f(s), composite Gauss-Legendre with
/// `panels` equal panels of `order` points.
template <class F>
cplx fourier_integral(F&& f, double omega, double a, double b, int panels, int order) {
  const QuadratureRule& rule = gauss_legendre(order);
  const double h = (b - a) / panels;
  cplx acc{0.0, 0.0};
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    const double mid = lo + 0.5 * h;
    cplx panel{0.0, 0.0};
    for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
      const double s = mid + 0.5 * h * rule.nodes(q);
      panel += rule.weights(q) * cplx(f(s)) * std::polar(1.0, omega * s);
    }
    acc += 0.5 * h * panel;
  }
  return acc;
}

/// Numeric Fourier transform int_{-W}^{W} ds e^{i omega s} f(s). The window
/// always has a panel boundary at s = 0. Flags the result when |f| at either
/// endpoint exceeds 1e-12.
template <class F>
FourierResult fourier_transform_1d(F&& f, double omega, double window, FourierOptions options = {}) {
  if (!(window > 0.0) || !std::isfinite(window))
    throw ValidationError("fourier_transform_1d: window must be positive and finite");
  if (!std::isfinite(omega)) throw ValidationError("fourier_transform_1d: omega must be finite");
  int panels = options.panels;
  if (panels <= 0) {
    const double oscillations = std::abs(omega) * window / (2.0 * kPi);
    panels = std::max(32, static_cast<int>(std::ceil(2.0 * oscillations)));
  }
  FourierResult out;
  out.value = fourier_integral(f, omega, -window, 0.0, panels, options.order) +
              fourier_integral(f, omega, 0.0, window, panels, options.order);
  out.endpoint_magnitude = std::max(std::abs(cplx(f(-window))), std::abs(cplx(f(window))));
  out.flagged = out.endpoint_magnitude > kFourierEndpointTolerance;
  return out;
}

/// A value with a grid-doubling error estimate |f(2n) - f(n)|.
struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

template <class F>
Estimate refine_by_doubling(F&& eval_at, int n) {
  const double coarse = eval_at(n);
  const double fine = eval_at(2 * n);
  return {fine, std::abs(fine - coarse)};
}

/// Trapezoid rule over sampled values (x strictly increasing).
double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

/// Thread count from an explicit request, else RQDET_THREADS, else hardware.
unsigned resolve_thread_count(int requested);

/// Deterministic parallel map: contiguous static chunks, outputs written in
/// input order. The first exception (lowest index) is rethrown.
template <class T, class F>
auto parallel_map(const std::vector<T>& inputs, F&& fn, unsigned threads)
    -> std::vector<std::invoke_result_t<F&, const T&>> {
  using R = std::invoke_result_t<F&, const T&>;
  const std::size_t n = inputs.size();
  std::vector<R> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(inputs[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) out[i] = fn(inputs[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace rqdet
