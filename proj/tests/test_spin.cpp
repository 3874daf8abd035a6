#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "rqdet/spin.hpp"

using namespace rqdet;

namespace {

Matrix4cd sigma_z_operator() {
  Matrix4cd m = Matrix4cd::Zero();
  m.diagonal() << 1, -1, 1, -1;
  return m;
}

Matrix4cd random_hermitian(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix4cd a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cplx(n(rng), n(rng));
  Matrix4cd h = a + a.adjoint();
  return h * (scale / h.operatorNorm());
}

Eigen::VectorXcd gaussian_psi(const MomentumGrid& g, double k0, double spread) {
  Eigen::VectorXcd psi(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double d = (g.nodes()(i) - k0) / spread;
    psi(i) = std::exp(-0.25 * d * d);
  }
  return psi;
}

DetectorConfig static_detector() {
  DetectorConfig det;
  det.sigma = 1.0;
  det.delta = 0.05;
  return det;
}

}  // namespace

TEST_CASE("gamma matrices satisfy the Clifford algebra") {
  Eigen::Vector4d metric(1.0, -1.0, -1.0, -1.0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const Matrix4cd ac = DiracSpinorBasis::gamma(a) * DiracSpinorBasis::gamma(b) +
                           DiracSpinorBasis::gamma(b) * DiracSpinorBasis::gamma(a);
      const Matrix4cd expected = (a == b ? 2.0 * metric(a) : 0.0) * Matrix4cd::Identity();
      CHECK((ac - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("Dirac spinors: rest frame and the k_z = m example") {
  const double m = 1.3;
  const DiracSpinorBasis basis(m);
  for (int r : {1, 2}) {
    const Vector4cd u = basis.u(0.0, r);
    Vector4cd expected = Vector4cd::Zero();
    expected(r - 1) = std::sqrt(2.0 * m);
    CHECK((u - expected).norm() < 1e-15);
    CHECK(u.squaredNorm() == doctest::Approx(2.0 * m).epsilon(1e-15));
    CHECK(basis.u(m, r).squaredNorm() == doctest::Approx(2.0 * std::sqrt(2.0) * m).epsilon(1e-12));
  }
  CHECK_THROWS_AS(DiracSpinorBasis(0.0), ValidationError);
  CHECK_THROWS_AS((void)basis.u(0.1, 3), ValidationError);
}

TEST_CASE("Dirac spinors: normalization, orthogonality and spin sum on random momenta") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-20.0, 20.0);
  std::uniform_real_distribution<double> mass(0.1, 5.0);
  double worst = 0.0;
  for (int n = 0; n < 10000; ++n) {
    const DiracSpinorBasis basis(mass(rng));
    const double m = basis.mass();
    const Vec3 k(dist(rng), dist(rng), dist(rng));
    const double w = std::sqrt(k.squaredNorm() + m * m);
    const Vector4cd u1 = basis.u(k, 1), u2 = basis.u(k, 2);
    const cplx b11 = DiracSpinorBasis::bar(u1).transpose() * u1;
    const cplx b12 = DiracSpinorBasis::bar(u1).transpose() * u2;
    worst = std::max({worst, std::abs(b11 - 2.0 * m) / (2.0 * m), std::abs(u1.squaredNorm() - 2.0 * w) / (2.0 * w),
                      std::abs(u2.squaredNorm() - 2.0 * w) / (2.0 * w), std::abs(b12) / (2.0 * m),
                      std::abs(u1.dot(u2)) / (2.0 * w)});
    const Matrix4cd sum = u1 * DiracSpinorBasis::bar(u1).transpose() + u2 * DiracSpinorBasis::bar(u2).transpose();
    worst = std::max(worst, (sum - basis.spin_sum_projector(k)).cwiseAbs().maxCoeff() / (2.0 * w));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("Dirac spinors equal the boosted rest spinors") {
  const double m = 0.8;
  const DiracSpinorBasis basis(m);
  const Vec3 k(0.3, -1.1, 2.0);
  const Vec3 n = k.normalized();
  const double eta = std::asinh(k.norm() / m);
  // Boost generator alpha . n with alpha^i = gamma^0 gamma^i.
  Matrix4cd alpha_n = Matrix4cd::Zero();
  for (int a = 0; a < 3; ++a) alpha_n += n(a) * DiracSpinorBasis::gamma(0) * DiracSpinorBasis::gamma(a + 1);
  const Matrix4cd boost = std::cosh(eta / 2.0) * Matrix4cd::Identity() + std::sinh(eta / 2.0) * alpha_n;
  for (int r : {1, 2}) CHECK((boost * basis.u(Vec3::Zero(), r) - basis.u(k, r)).norm() < 1e-12);
}

TEST_CASE("spin operator validation") {
  CHECK_NOTHROW(validate_spin_operator(sigma_z_operator()));
  CHECK_NOTHROW(validate_spin_operator(DiracSpinorBasis::gamma(0)));
  CHECK_THROWS_AS(validate_spin_operator(cplx(0.0, 1.0) * Matrix4cd::Identity()), ValidationError);
  CHECK_NOTHROW(SpinPOVMKernel::constant(DiracSpinorBasis::gamma(2)));
  CHECK_THROWS_AS(SpinPOVMKernel::constant(cplx(0.0, 1.0) * DiracSpinorBasis::gamma(0)), ValidationError);
}

TEST_CASE("projected spin matrix: examples") {
  const DiracSpinorBasis basis(1.0);
  const auto zero = SpinPOVMKernel::constant(Matrix4cd::Zero());
  CHECK(sigma_projected(zero, basis, 0.0, 0.7).cwiseAbs().maxCoeff() == 0.0);
  const auto sz = SpinPOVMKernel::constant(sigma_z_operator());
  Matrix2cd pauli_z;
  pauli_z << 1, 0, 0, -1;
  CHECK((sigma_projected(sz, basis, 0.0, 0.0) - pauli_z).cwiseAbs().maxCoeff() < 1e-15);
  // Along the beam axis the helicity structure survives any boost.
  for (double k : {0.1, 1.0, 7.0}) CHECK((sigma_projected(sz, basis, 3.0, k) - pauli_z).cwiseAbs().maxCoeff() < 1e-12);
  const auto too_big = SpinPOVMKernel::constant(2.0 * Matrix4cd::Identity());
  try {
    (void)sigma_projected(too_big, basis, 1.5, 0.25);
    FAIL("expected a spectral-bound error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("(Q, k) = (1.5, 0.25)") != std::string::npos);
  }
}

TEST_CASE("projected spin matrix is Hermitian for admissible operators") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> kd(-3.0, 3.0), qd(-10.0, 10.0);
  const DiracSpinorBasis basis(1.0);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Matrix4cd op = DiracSpinorBasis::gamma(0) * random_hermitian(rng, 0.25);
    const auto s = SpinPOVMKernel::constant(op);
    const Matrix2cd p = sigma_projected(s, basis, qd(rng), kd(rng));
    worst = std::max(worst, (p - p.adjoint()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("tabulated spin kernel: bilinear interpolation, range and CSV") {
  std::vector<double> qs{0.0, 1.0, 2.0}, ps{-1.0, 1.0};
  std::vector<Matrix4cd> vals;
  for (double q : qs)
    for (double p : ps) vals.push_back((0.1 * q + 0.2 * p) * sigma_z_operator());
  const auto s = SpinPOVMKernel::tabulated(qs, ps, vals);
  CHECK((s(1.5, 0.3) - (0.15 + 0.06) * sigma_z_operator()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS((void)s(2.5, 0.0), ValidationError);
  CHECK_THROWS_AS((void)s(1.0, -1.5), ValidationError);
  const std::string path = "spin_kernel_test.csv";
  {
    std::ofstream out(path);
    out << "# Q, p, then Re/Im of Sigma row-major\n";
    for (std::size_t iq = 0; iq < qs.size(); ++iq)
      for (std::size_t ip = 0; ip < ps.size(); ++ip) {
        out << qs[iq] << "," << ps[ip];
        const Matrix4cd& m = vals[iq * ps.size() + ip];
        for (int e = 0; e < 16; ++e) out << "," << m(e / 4, e % 4).real() << "," << m(e / 4, e % 4).imag();
        out << "\n";
      }
  }
  const auto loaded = load_spin_kernel_csv(path);
  CHECK((loaded(0.4, 0.9) - s(0.4, 0.9)).cwiseAbs().maxCoeff() < 1e-15);
  std::remove(path.c_str());
}

TEST_CASE("spinor density matrix validation") {
  const auto g = build_grid(0.5, 1.5, 8, QuadratureScheme::gauss_legendre, 1.0);
  const auto rho = SpinorReducedDensityMatrix::product(g, Eigen::VectorXcd::Ones(8), Eigen::Vector2cd(1.0, 1.0));
  CHECK(rho.trace() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(SpinorReducedDensityMatrix(g, 2.0 * rho.matrix()), ValidationError);
  Eigen::MatrixXcd bad = rho.matrix();
  bad(0, 3) += cplx(0.0, 0.1);
  CHECK_THROWS_AS(SpinorReducedDensityMatrix(g, bad), ValidationError);
  CHECK_THROWS_AS(SpinorReducedDensityMatrix(g, Eigen::MatrixXcd::Identity(8, 8)), ValidationError);
}

TEST_CASE("spin densities: zero kernel and outcome completeness") {
  const auto g = build_grid(0.6, 1.4, 48, QuadratureScheme::gauss_legendre, 1.0);
  Eigen::MatrixX2cd psi(48, 2);
  psi.col(0) = gaussian_psi(g, 1.0, 0.08);
  psi.col(1) = cplx(0.3, 0.4) * gaussian_psi(g, 0.95, 0.06);
  const auto rho = SpinorReducedDensityMatrix::pure(g, psi);
  const SpinDensityEvaluator zero(rho, SpinPOVMKernel::constant(Matrix4cd::Zero()), 15.0);
  for (double tau = 10.0; tau < 30.0; tau += 1.7) {
    const double full = spin_summed_density(rho, tau, 15.0);
    CHECK(std::abs(zero(tau, 1) - 0.5 * full) <= 1e-10 * full);
    CHECK(std::abs(zero(tau, -1) - 0.5 * full) <= 1e-10 * full);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> td(0.0, 60.0), qd(0.0, 30.0);
  const Matrix4cd op = DiracSpinorBasis::gamma(0) * random_hermitian(rng, 0.2);
  const auto s = SpinPOVMKernel::constant(op);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const double q = qd(rng), tau = td(rng);
    const SpinDensityEvaluator ev(rho, s, q);
    const double full = spin_summed_density(rho, tau, q);
    const double scale = std::max(full, spin_summed_density(rho, q * std::sqrt(2.0), q));
    worst = std::max(worst, std::abs(ev(tau, 1) + ev(tau, -1) - full) / scale);
  }
  CHECK(worst < 1e-10);
  CHECK(spin_toa_density(rho, s, static_detector(), 20.0, 15.0, 1) == SpinDensityEvaluator(rho, s, 15.0)(20.0, 1));
  auto moving = static_detector();
  moving.embedding = InertialEmbedding{Vec3(0.1, 0.0, 0.0)};
  CHECK_THROWS_AS(spin_toa_density(rho, s, moving, 20.0, 15.0, 1), ValidationError);
  CHECK_THROWS_AS((void)SpinDensityEvaluator(rho, s, 15.0)(20.0, 0), ValidationError);
}

TEST_CASE("spin densities: polarized slow packet") {
  const double k0 = 0.05;
  const auto g = build_grid(0.02, 0.08, 96, QuadratureScheme::gauss_legendre, 1.0);
  const auto rho = SpinorReducedDensityMatrix::product(g, gaussian_psi(g, k0, 0.005), Eigen::Vector2cd(1.0, 0.0));
  const SpinDensityEvaluator ev(rho, SpinPOVMKernel::constant(sigma_z_operator()), 10.0);
  for (double tau = 150.0; tau < 260.0; tau += 5.0) {
    const double full = spin_summed_density(rho, tau, 10.0);
    CHECK(std::abs(ev(tau, 1) - full) <= 1e-3 * full);
    CHECK(std::abs(ev(tau, -1)) <= 1e-3 * ev(tau, 1));
  }
}

TEST_CASE("outcome probabilities: examples and simplex") {
  const auto g = build_grid(0.5, 1.5, 16, QuadratureScheme::gauss_legendre, 1.0);
  const auto zero = SpinPOVMKernel::constant(Matrix4cd::Zero());
  const auto sz = SpinPOVMKernel::constant(sigma_z_operator());
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int n = 0; n < 50; ++n) {
    Eigen::MatrixX2cd psi(16, 2);
    for (Eigen::Index i = 0; i < 16; ++i) psi(i, 0) = cplx(nd(rng), nd(rng)), psi(i, 1) = cplx(nd(rng), nd(rng));
    const auto rho = SpinorReducedDensityMatrix::pure(g, psi);
    const auto p0 = spin_outcome_probability(rho, zero, 0.0);
    CHECK(p0.at(1) == 0.5);
    CHECK(p0.at(-1) == 0.5);
    const auto p = spin_outcome_probability(rho, SpinPOVMKernel::constant(DiracSpinorBasis::gamma(0) *
                                                                         random_hermitian(rng, 0.2)), 0.0);
    CHECK(p.at(1) + p.at(-1) == 1.0);
    CHECK(p.at(1) >= 0.0);
    CHECK(p.at(-1) >= 0.0);
    const auto a = spin_outcome_probability(rho, sz, -40.0);
    const auto b = spin_outcome_probability(rho, sz, 1234.5);
    CHECK(a.at(1) == b.at(1));
    CHECK(a.at(-1) == b.at(-1));
  }
  Eigen::MatrixX2cd single = Eigen::MatrixX2cd::Zero(16, 2);
  single(6, 0) = 1.0;
  const auto up = spin_outcome_probability(SpinorReducedDensityMatrix::pure(g, single), sz, 0.0);
  CHECK(up.at(1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(up.at(-1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("outcome probability is the time integral of the spin-resolved density") {
  const double theta = 1.1;
  const auto g = build_grid(0.7, 1.3, 128, QuadratureScheme::gauss_legendre, 1.0);
  const Eigen::Vector2cd chi(std::cos(theta / 2.0), std::sin(theta / 2.0));
  const auto rho = SpinorReducedDensityMatrix::product(g, gaussian_psi(g, 1.0, 0.05), chi);
  const auto s = SpinPOVMKernel::constant(sigma_z_operator());
  const auto p = spin_outcome_probability(rho, s, 20.0);
  CHECK(p.at(1) == doctest::Approx(std::pow(std::cos(theta / 2.0), 2)).epsilon(1e-12));
  const SpinDensityEvaluator ev(rho, s, 20.0);
  for (int mu : {1, -1}) {
    const QuadratureRule r = gauss_legendre(400, -20.0, 80.0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.nodes.size(); ++i) acc += r.weights(i) * ev(r.nodes(i), mu);
    CHECK(acc == doctest::Approx(p.at(mu)).epsilon(2e-3));
  }
}
