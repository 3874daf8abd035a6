#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "rqdet/coincidence.hpp"

using namespace rqdet;

namespace {

DetectorConfig detector(double energy, double sigma) {
  DetectorConfig det;
  det.sigma = sigma;
  det.delta = 0.05;
  det.degradation = GaussianEnergyDegradation{energy, 1.0, 1.0};
  return det;
}

// Two grid segments around -k0 and +k0.
MomentumGrid split_grid(double k0, double spread, int n) {
  const auto left = build_grid(-k0 - 6.0 * spread, -k0 + 6.0 * spread, n, QuadratureScheme::gauss_legendre, 1.0);
  const auto right = build_grid(k0 - 6.0 * spread, k0 + 6.0 * spread, n, QuadratureScheme::gauss_legendre, 1.0);
  return merge_grids(left, right);
}

cplx single_amplitude(const OneParticleState& s, const Vec4& x) {
  const auto& g = s.grid();
  cplx acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < g.size(); ++i)
    acc += g.measure_weights()(i) * s.psi()(i) * std::polar(1.0, g.nodes()(i) * x(1) - g.energies()(i) * x(0));
  return acc;
}

}  // namespace

TEST_CASE("two-particle state validation and loader") {
  const auto g = build_grid(0.5, 1.5, 6, QuadratureScheme::gauss_legendre, 1.0);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Random(6, 6);
  CHECK_THROWS_AS(TwoParticleState(g, m), ValidationError);
  CHECK_NOTHROW(TwoParticleState(g, m + m.transpose()));
  CHECK_THROWS_AS(TwoParticleState(g, Eigen::MatrixXcd::Zero(5, 5)), ValidationError);
  const std::string path = "two_particle_test.csv";
  {
    std::ofstream out(path);
    out << "k1,k2,re,im\n";
    const double ks[2] = {0.5, 1.0};
    for (double a : ks)
      for (double b : ks) out << a << "," << b << "," << a + b << "," << a * b << "\n";
  }
  const auto s = load_two_particle_csv(path, 1.0);
  CHECK(s.grid().size() == 2);
  CHECK(s.psi()(0, 1) == cplx(1.5, 0.5));
  std::remove(path.c_str());
}

TEST_CASE("two-particle amplitude: zero state and bosonic symmetry") {
  const auto g = split_grid(1.0, 0.1, 24);
  const TwoParticleState zero(g, Eigen::MatrixXcd::Zero(g.size(), g.size()));
  CHECK(two_particle_amplitude(zero, Vec4(1.0, 2.0, 0.0, 0.0), Vec4(3.0, -1.0, 0.0, 0.0)) == cplx(0.0, 0.0));
  CHECK(joint_toa_density(zero, detector(1.4, 1.0), detector(1.4, 1.0), 10.0, 5.0, 12.0, -5.0) == 0.0);
  const auto a = OneParticleState::gaussian(g, 1.0, 0.1);
  const auto b = OneParticleState::gaussian(g, -1.0, 0.1, 2.0, 0.0);
  const auto s = TwoParticleState::symmetrized_product(a, b);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-30.0, 30.0);
  for (int n = 0; n < 200; ++n) {
    const Vec4 x1(d(rng), d(rng), 0.0, 0.0), x2(d(rng), d(rng), 0.0, 0.0);
    CHECK(two_particle_amplitude(s, x1, x2) == two_particle_amplitude(s, x2, x1));
  }
}

TEST_CASE("two-particle amplitude factorizes for disjoint packets") {
  const auto g = split_grid(1.0, 0.1, 48);
  const auto a = OneParticleState::gaussian(g, 1.0, 0.1);
  const auto b = OneParticleState::gaussian(g, -1.0, 0.1);
  const auto s = TwoParticleState::symmetrized_product(a, b);
  // At t = 30 the packets sit near x = +-30 v.
  const double t = 30.0, x = t / std::sqrt(2.0);
  const Vec4 x1(t, x, 0.0, 0.0), x2(t, -x, 0.0, 0.0);
  const cplx full = two_particle_amplitude(s, x1, x2);
  const cplx product = 0.5 * single_amplitude(a, x1) * single_amplitude(b, x2);
  CHECK(std::abs(full - product) < 1e-3 * std::abs(full));
}

TEST_CASE("joint density: factorized and nested quadrature agree") {
  const auto g = split_grid(1.0, 0.1, 16);
  const auto s = TwoParticleState::symmetrized_product(OneParticleState::gaussian(g, 1.0, 0.1),
                                                       OneParticleState::gaussian(g, -1.0, 0.1));
  const auto d1 = detector(1.4, 0.8);
  auto d2 = detector(1.2, 0.6);
  for (int moving = 0; moving < 2; ++moving) {
    if (moving) d2.embedding = InertialEmbedding{Vec3(-0.3, 0.0, 0.0)};
    const JointDensityEvaluator ev(s, d1, d2);
    for (double t1 : {25.0, 28.0})
      for (double t2 : {26.0, 30.0}) {
        Diagnostics diag;
        const double a = ev(t1, 20.0, t2, -20.0);
        const double b = joint_toa_density_nested(s, d1, d2, t1, 20.0, t2, -20.0, &diag);
        CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));
        CHECK_FALSE(diag.has("window-truncation"));
      }
  }
}

TEST_CASE("joint density: exchange of identical detectors is exact") {
  const auto g = split_grid(1.0, 0.1, 24);
  const auto s = TwoParticleState::symmetrized_product(OneParticleState::gaussian(g, 1.0, 0.1),
                                                       OneParticleState::gaussian(g, -0.9, 0.12, 1.0, 0.0));
  const auto det = detector(1.4, 1.0);
  const JointDensityEvaluator ev(s, det, det);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> t(15.0, 40.0), q(-25.0, 25.0);
  for (int n = 0; n < 50; ++n) {
    const double t1 = t(rng), t2 = t(rng), q1 = q(rng), q2 = q(rng);
    const auto x = ev.sample(t1, q1, t2, q2);
    CHECK(x.value == ev(t2, q2, t1, q1));
    CHECK(x.imag_residue < 1e-8);
  }
}

TEST_CASE("joint density rejects accelerated detectors") {
  const auto g = split_grid(1.0, 0.1, 8);
  const auto s = TwoParticleState::symmetrized_product(OneParticleState::gaussian(g, 1.0, 0.1),
                                                       OneParticleState::gaussian(g, -1.0, 0.1));
  auto det = detector(1.4, 1.0);
  det.embedding = UniformAccelerationEmbedding{0.01};
  CHECK_THROWS_AS(JointDensityEvaluator(s, detector(1.4, 1.0), det), ValidationError);
}

TEST_CASE("joint density: product of marginals for packets aimed one per detector") {
  const double k0 = 1.0, spread = 0.1, q1 = 20.0, q2 = -20.0;
  const auto g = split_grid(k0, spread, 48);
  const auto a = OneParticleState::gaussian(g, k0, spread);
  const auto b = OneParticleState::gaussian(g, -k0, spread);
  const auto det = detector(std::sqrt(2.0), 1.0);
  const JointDensityEvaluator joint(TwoParticleState::symmetrized_product(a, b), det, det);
  const auto pa = make_toa_evaluator(ReducedDensityMatrix::pure(a), det);
  const auto pb = make_toa_evaluator(ReducedDensityMatrix::pure(b), det);
  std::vector<double> taus;
  for (double t = 18.0; t <= 38.0; t += 0.5) taus.push_back(t);
  std::vector<double> ma, mb;
  for (double t : taus) ma.push_back(pa(t, q1)), mb.push_back(pb(t, q2));
  double sj = 0.0, sp = 0.0;
  std::vector<double> jv, pv;
  for (std::size_t i = 0; i < taus.size(); ++i)
    for (std::size_t j = 0; j < taus.size(); ++j) {
      jv.push_back(joint(taus[i], q1, taus[j], q2));
      pv.push_back(ma[i] * mb[j]);
      sj += jv.back();
      sp += pv.back();
    }
  double l1 = 0.0;
  for (std::size_t n = 0; n < jv.size(); ++n) l1 += std::abs(jv[n] / sj - pv[n] / sp);
  CHECK(l1 < 0.05);
}
