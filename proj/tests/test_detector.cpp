#include <doctest.h>

#include <random>
#include <sstream>

#include "rqdet/detector.hpp"

using namespace rqdet;

namespace {

std::vector<DegradationFunction> sample_variants() {
  std::vector<cplx> tab;
  for (int i = -200; i <= 200; ++i) {
    const double s = 0.05 * i;
    tab.push_back(std::polar(std::exp(-std::abs(s)), 0.0));
  }
  return {
      GaussianEnergyDegradation{0.7, 2.0, 0.5},
      GaussianEnergyDegradation{0.0, 0.0, 1.0},
      DiffusionDegradation{0.3, 0.7},
      GaussianDegradation{0.4},
      TabulatedDegradation(-10.0, 0.05, tab),
      AbsorptionDegradation([](double w) { return 1.0 / w; }, 1.0, 4.0),
  };
}

}  // namespace

TEST_CASE("gaussian-energy degradation closed form") {
  const DegradationFunction d = GaussianEnergyDegradation{0.0, 1.0, 1.0};
  CHECK(eval_eta(d, 0.0) == cplx(1.0));
  for (auto [c, t] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.5}, std::pair{0.3, 4.0}}) {
    const DegradationFunction g = GaussianEnergyDegradation{1.3, c, t};
    const double td = 1.0 / (std::sqrt(c) * t);
    CHECK(decay_time(g) == doctest::Approx(td));
    CHECK(std::abs(std::abs(eval_eta(g, td)) - std::exp(-0.5)) < 1e-12);
  }
  CHECK(std::exp(-0.5) == doctest::Approx(0.60653).epsilon(1e-5));
}

TEST_CASE("diffusion degradation is normalized") {
  for (auto [dc, r] : {std::pair{1.0, 1.0}, std::pair{0.3, 0.7}, std::pair{5.0, 0.1}}) {
    const DegradationFunction d = DiffusionDegradation{dc, r};
    CHECK(eval_eta(d, 0.0) == cplx(1.0));
    CHECK(std::abs(std::norm(eval_eta(d, r * r / dc)) - std::pow(2.0, -1.5)) < 1e-12);
    CHECK(std::norm(eval_eta(d, -r * r / dc)) == doctest::Approx(0.35355).epsilon(1e-5));
    CHECK(eval_eta(d, 0.4).imag() == 0.0);
  }
}

TEST_CASE("every variant: |eta| <= 1 and eta(0) = 1") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  for (const auto& d : sample_variants()) {
    CAPTURE(degradation_kind(d));
    CHECK(std::abs(eval_eta(d, 0.0) - 1.0) < 1e-12);
    const int n = std::holds_alternative<AbsorptionDegradation>(d) ? 300 : 10000;
    for (int i = 0; i < n; ++i) {
      const double s = u(rng);
      const cplx v = eval_eta(d, s);
      CHECK(std::abs(v) <= 1.0 + 1e-12);
      CHECK(std::abs(eval_eta(d, -s) - std::conj(v)) < 1e-12);
    }
  }
}

TEST_CASE("eval_eta rejects non-finite s") {
  CHECK_THROWS_AS(eval_eta(GaussianDegradation{1.0}, NAN), ValidationError);
}

TEST_CASE("eta_tilde: analytic Gaussian") {
  const DegradationFunction d = GaussianDegradation{1.0};
  const auto r0 = eta_tilde(d, kInfinity, 0.0);
  CHECK(r0.value.real() == doctest::Approx(2.50663).epsilon(1e-5));
  const auto r1 = eta_tilde(d, kInfinity, 1.0);
  CHECK(r1.value.real() == doctest::Approx(1.52035).epsilon(1e-5));
  for (double td : {0.1, 0.5, 3.0}) {
    const DegradationFunction g = GaussianDegradation{td};
    CHECK(eta_tilde(g, kInfinity, 0.0).value.real() == doctest::Approx(std::sqrt(2.0 * kPi) * td).epsilon(1e-14));
  }
}

TEST_CASE("eta_tilde: analytic shortcut agrees with numeric transform of g*eta") {
  for (const DegradationFunction& d :
       {DegradationFunction{GaussianEnergyDegradation{1.5, 2.0, 0.5}}, DegradationFunction{GaussianDegradation{0.3}}}) {
    const double sigma = 0.8;
    for (double w : {-2.0, 0.0, 0.7, 1.5, 4.0}) {
      const auto analytic = eta_tilde(d, sigma, w);
      const auto numeric = fourier_transform_1d(
          [&](double s) { return effective_window(d, sigma, s); }, w, window_halfwidth(d, sigma), {64, 20});
      CHECK(std::abs(analytic.value - numeric.value) < 1e-10);
    }
  }
}

TEST_CASE("eta_tilde: tabulated exp(-|s|/tau_d)") {
  for (double td : {0.5, 1.0, 2.0}) {
    const double ds = 0.002 * td;
    const int half = 20000;
    std::vector<cplx> v;
    for (int i = -half; i <= half; ++i) v.emplace_back(std::exp(-std::abs(i * ds) / td));
    const DegradationFunction d = TabulatedDegradation(-half * ds, ds, v);
    const auto r = eta_tilde(d, kInfinity, 0.0);
    CHECK(std::abs(r.value.real() - 2.0 * td) < 1e-4);
    CHECK(std::abs(r.value.imag()) < 1e-12);
    // Lorentzian oracle at finite frequency.
    const double w = 1.3;
    CHECK(std::abs(eta_tilde(d, kInfinity, w).value.real() - 2.0 * td / (1.0 + w * w * td * td)) < 1e-4);
  }
}

TEST_CASE("eta_tilde of a real even window is real and even") {
  for (const DegradationFunction& d :
       {DegradationFunction{DiffusionDegradation{1.0, 0.5}}, DegradationFunction{GaussianDegradation{0.7}}}) {
    for (double w : {0.0, 0.3, 1.7, 5.0}) {
      const auto a = eta_tilde(d, 2.0, w);
      const auto b = eta_tilde(d, 2.0, -w);
      CHECK(std::abs(a.value.imag()) < 1e-10 * std::abs(a.value));
      CHECK(std::abs(a.value - b.value) < 1e-10 * std::abs(a.value));
      CHECK_FALSE(a.flagged);
    }
  }
}

TEST_CASE("eta_tilde: diffusion agrees with a brute-force transform") {
  const DegradationFunction d = DiffusionDegradation{2.0, 0.5};
  const double sigma = 1.0;
  for (double w : {0.0, 1.0, 6.0}) {
    // Plain midpoint rule on a very fine grid, cosine form.
    const int n = 400000;
    const double wmax = 15.0 * sigma;
    const double h = wmax / n;
    double ref = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = (i + 0.5) * h;
      ref += 2.0 * h * effective_window(d, sigma, s).real() * std::cos(w * s);
    }
    CHECK(eta_tilde(d, sigma, w).value.real() == doctest::Approx(ref).epsilon(1e-7));
  }
}

TEST_CASE("eta_tilde: endpoint flag for non-decaying window") {
  // Diffusion without coarse graining has an algebraic tail.
  CHECK(eta_tilde(DiffusionDegradation{1.0, 1.0}, kInfinity, 0.0).flagged);
  CHECK_THROWS_AS(eta_tilde(GaussianEnergyDegradation{0.0, 0.0, 1.0}, kInfinity, 0.0), ValidationError);
}

TEST_CASE("eta_tilde_from_absorption") {
  CHECK(eta_tilde_from_absorption([](double) { return 3.0; }, 1.0, 1.0) == 0.0);
  CHECK(eta_tilde_from_absorption([](double) { return 1.0; }, 1.0, std::sqrt(2.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eta_tilde_from_absorption([](double w) { return 1.0 / w; }, 0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(eta_tilde_from_absorption([](double) { return 1.0; }, 1.0, 0.5), ValidationError);
}

TEST_CASE("from-absorption variant: spectrum and implied eta are consistent") {
  const AbsorptionDegradation ab([](double) { return 1.0; }, 1.0, 3.0);
  const DegradationFunction d = ab;
  CHECK(ab.spectrum(0.5) == 0.0);
  CHECK(ab.spectrum(2.0) == doctest::Approx(ab.normalization() * std::sqrt(3.0)));
  CHECK(std::abs(eval_eta(d, 0.0) - 1.0) < 1e-10);
  // sigma = inf returns the normalized spectrum itself.
  CHECK(eta_tilde(d, kInfinity, 2.0).value.real() == doctest::Approx(ab.spectrum(2.0)));
  // Finite sigma smooths it; total weight is preserved away from edges.
  CHECK(eta_tilde(d, 5.0, 2.0).value.real() == doctest::Approx(ab.spectrum(2.0)).epsilon(2e-2));
}

TEST_CASE("embeddings: reference worldlines") {
  const Embedding st = StaticEmbedding{};
  const Vec4 p = embedding_point(st, 2.5, Vec3(1.0, 2.0, 3.0));
  CHECK(p == Vec4(2.5, 1.0, 2.0, 3.0));
  CHECK(four_velocity(st, 7.0) == Vec4(1.0, 0.0, 0.0, 0.0));
  const Embedding ua = UniformAccelerationEmbedding{1.0};
  CHECK((four_velocity(ua, 0.0) - Vec4(1.0, 0.0, 0.0, 0.0)).norm() < 1e-15);
  const Embedding in = InertialEmbedding{Vec3(0.6, 0.0, 0.0)};
  const Vec4 u = four_velocity(in, 3.0);
  CHECK((u - Vec4(1.25, 0.75, 0.0, 0.0)).norm() < 1e-14);
  CHECK(minkowski_dot(u, u) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("embeddings: u.u = -1 for every kind") {
  std::vector<double> taus;
  std::vector<Vec4> pts;
  const double a = 0.3;
  for (int i = 0; i <= 400; ++i) {
    const double t = -12.0 + 0.06 * i;
    taus.push_back(t);
    pts.emplace_back(std::sinh(a * t) / a, (std::cosh(a * t) - 1.0) / a, 0.0, 0.0);
  }
  const std::vector<Embedding> kinds{StaticEmbedding{}, InertialEmbedding{Vec3(0.2, -0.5, 0.1)},
                                     UniformAccelerationEmbedding{0.8}, TabulatedEmbedding(taus, pts)};
  for (const auto& e : kinds) {
    CAPTURE(embedding_kind(e));
    for (int i = 0; i <= 200; ++i) {
      const double tau = -10.0 + 0.1 * i;
      const Vec4 u = four_velocity(e, tau);
      CHECK(std::abs(minkowski_dot(u, u) + 1.0) < 1e-8);
      CHECK(u(0) > 0.0);
    }
  }
  // The tabulated hyperbola reproduces the analytic one.
  const Embedding tab = TabulatedEmbedding(taus, pts);
  const Embedding exact = UniformAccelerationEmbedding{a};
  for (double tau : {-5.0, 0.0, 3.3}) {
    CHECK((four_velocity(tab, tau) - four_velocity(exact, tau)).norm() < 1e-5);
    CHECK((embedding_point(tab, tau, Vec3::Zero()) - embedding_point(exact, tau, Vec3::Zero())).norm() < 1e-5);
    CHECK(proper_acceleration(tab, tau) == doctest::Approx(a).epsilon(1e-3));
  }
  CHECK_THROWS_AS(four_velocity(tab, 20.0), ValidationError);
}

TEST_CASE("embeddings: validation") {
  CHECK_THROWS_AS(validate_embedding(InertialEmbedding{Vec3(1.0, 0.0, 0.0)}), ValidationError);
  CHECK_THROWS_AS(validate_embedding(UniformAccelerationEmbedding{0.0}), ValidationError);
}

TEST_CASE("worldline CSV loader") {
  std::istringstream in("tau,t,x,y,z\n0,0,0,0,0\n1,1,0,0,0\n2,2,0,0,0\n");
  const Embedding e = load_worldline_csv(in);
  CHECK(std::abs(minkowski_dot(four_velocity(e, 1.5), four_velocity(e, 1.5)) + 1.0) < 1e-12);
  std::istringstream spacelike("0,0,0,0,0\n1,0.5,1,0,0\n");
  CHECK_THROWS_AS(load_worldline_csv(spacelike), ValidationError);
}

TEST_CASE("degradation CSV loader") {
  std::istringstream in("s,re,im\n-0.2,0.5,0\n-0.1,0.8,0.1\n0,2,0\n0.1,0.8,-0.1\n0.2,0.5,0\n");
  const auto tab = load_degradation_csv(in);
  CHECK(tab(0.0) == cplx(1.0));
  CHECK(std::abs(tab(0.1) - cplx(0.4, -0.05)) < 1e-15);
  CHECK(std::abs(tab(0.05) - cplx(0.7, -0.025)) < 1e-15);
  CHECK(tab(1.0) == cplx(0.0));
  std::istringstream ragged("-0.2,0.5\n-0.1,0.8\n0,1\n0.3,0.8\n");
  CHECK_THROWS_AS(load_degradation_csv(ragged), ValidationError);
  std::istringstream growing("-0.1,2\n0,1\n0.1,0.5\n");
  CHECK_THROWS_AS(load_degradation_csv(growing), ValidationError);
}

TEST_CASE("detector validation and sigma/delta advisory") {
  DetectorConfig det;
  det.sigma = 1.0;
  det.delta = 0.5;
  CHECK_NOTHROW(validate(det));
  CHECK(advisories(det).has("sigma-delta-ratio"));
  det.delta = 0.01;
  CHECK(advisories(det).empty());
  det.sigma = -1.0;
  CHECK_THROWS_AS(validate(det), ValidationError);
  det.sigma = 1.0;
  det.degradation = DiffusionDegradation{-1.0, 1.0};
  CHECK_THROWS_AS(validate(det), ValidationError);
}

TEST_CASE("spline reproduces cubic data") {
  std::vector<double> x, y;
  for (int i = 0; i <= 50; ++i) {
    x.push_back(0.1 * i);
    y.push_back(std::sin(0.1 * i));
  }
  const CubicSpline s(x, y);
  CHECK(s(2.345) == doctest::Approx(std::sin(2.345)).epsilon(1e-5));
  CHECK(s.derivative(2.345) == doctest::Approx(std::cos(2.345)).epsilon(1e-4));
}
