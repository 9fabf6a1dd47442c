#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "lts/spectral.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using namespace lts;
using namespace lts::spectral;

namespace {

MatrixXd random_gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = gauss(rng);
  return M;
}

// Random diagonalizable matrix with prescribed eigenvalues.
MatrixXd similarity(const VectorXd& lambdas, std::mt19937_64& rng) {
  const int n = static_cast<int>(lambdas.size());
  MatrixXd V;
  do {
    V = random_gaussian(n, n, rng);
  } while (std::abs(V.determinant()) < 1e-6);
  MatrixXd VL = V;
  for (int j = 0; j < n; ++j) VL.col(j) *= lambdas(j);
  return V.transpose().partialPivLu().solve(VL.transpose()).transpose();
}

MatrixXd random_orthonormal(int n, int k, std::mt19937_64& rng) {
  MatrixXd X = random_gaussian(n, k, rng);
  Eigen::HouseholderQR<MatrixXd> qr(X);
  return qr.householderQ() * MatrixXd::Identity(n, k);
}

}  // namespace

TEST_CASE("eig_sorted orders by decreasing modulus") {
  MatrixXd A(2, 2);
  A << 2, 0, 0, 0.5;
  auto es = eig_sorted(A);
  CHECK(es.values(0).real() == doctest::Approx(2.0));
  CHECK(es.values(1).real() == doctest::Approx(0.5));

  MatrixXd T(2, 2);
  T << 2, 1, 0, 0.5;
  auto et = eig_sorted(T);
  CHECK(et.values(0).real() == doctest::Approx(2.0));
  CHECK(et.values(1).real() == doctest::Approx(0.5));
  // Triangular: first eigenvector is e1.
  CHECK(et.vectors(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(et.vectors(1, 0)) < 1e-12);
}

TEST_CASE("eig_sorted rejects shared moduli and unit-circle moduli") {
  const double c = 0.9 * std::cos(0.3), s = 0.9 * std::sin(0.3);
  MatrixXd R(2, 2);
  R << c, -s, s, c;  // complex pair, both moduli 0.9
  CHECK_THROWS_AS(eig_sorted(R), Error);
  try {
    eig_sorted(R);
  } catch (const Error& e) {
    CHECK(e.code() == errc::distinct_modulus_violated);
  }

  MatrixXd U(2, 2);
  U << 1.0, 0, 0, 0.5;
  try {
    eig_sorted(U);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::modulus_on_unit_circle);
  }
}

TEST_CASE("invariant_split on decoupled diagonal") {
  MatrixXd A(2, 2);
  A << 2, 0, 0, 0.5;
  auto s = invariant_split(A, 1);
  CHECK(s.P1(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(s.P1(1, 0)) < 1e-12);
  CHECK(s.M1(0, 0) == doctest::Approx(2.0));
  CHECK(std::abs(s.Delta(0, 0)) < 1e-12);
  CHECK(s.M2(0, 0) == doctest::Approx(0.5));
  CHECK(s.Q1(0, 0) == doctest::Approx(1.0));
  CHECK(s.Q2(1, 0) == doctest::Approx(1.0));
  CHECK(s.xi == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("invariant_split on upper-triangular 2x2") {
  MatrixXd A(2, 2);
  A << 2, 1, 0, 0.5;
  auto s = invariant_split(A, 1);
  CHECK(std::abs(s.P1(0, 0)) == doctest::Approx(1.0));
  CHECK(s.M1(0, 0) == doctest::Approx(2.0));
  CHECK(std::abs(s.Delta(0, 0)) == doctest::Approx(1.0));
  CHECK(s.M2(0, 0) == doctest::Approx(0.5));
  // Stable eigenvector is parallel to (1, -1.5).
  double ratio = s.Q2(1, 0) / s.Q2(0, 0);
  CHECK(ratio == doctest::Approx(-1.5));
  // xi = 1 - sigma_min(P2^T Q2) = 1 - 3/sqrt(13)
  CHECK(s.xi == doctest::Approx(1.0 - 3.0 / std::sqrt(13.0)));
}

TEST_CASE("invariant_split picks e2 when the expanding mode sits there") {
  MatrixXd A(2, 2);
  A << 0.5, 0, 1, 2;
  auto s = invariant_split(A, 1);
  CHECK(std::abs(s.P1(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.P1(0, 0)) < 1e-12);
  CHECK(s.M1(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("invariant_split rejects a bad index") {
  MatrixXd A(2, 2);
  A << 2, 0, 0, 1.5;  // both expanding
  try {
    invariant_split(A, 1);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::bad_instability_index);
  }
}

TEST_CASE("invariant_split reconstruction and block identities") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 3 + static_cast<int>(unif(rng) * 6);
    int k = 1 + static_cast<int>(unif(rng) * std::min(3, n - 1));
    VectorXd lambdas(n);
    for (int i = 0; i < k; ++i) lambdas(i) = 1.2 + 0.8 * (k - i) + 0.1 * unif(rng);
    for (int i = k; i < n; ++i)
      lambdas(i) = 0.9 * std::pow(0.8, i - k) - 0.05 * unif(rng);
    MatrixXd A = similarity(lambdas, rng);

    SpectralSplit s;
    try {
      s = invariant_split(A, k);
    } catch (const Error&) {
      continue;  // rare modulus near-tie from the random draw
    }

    MatrixXd P(n, n);
    P << s.P1, s.P2;
    MatrixXd M(n, n);
    M.setZero();
    M.topLeftCorner(k, k) = s.M1;
    M.topRightCorner(k, n - k) = s.Delta;
    M.bottomRightCorner(n - k, n - k) = s.M2;
    double recon = spectral_norm(A - P * M * P.transpose());
    CHECK(recon < 1e-8 * spectral_norm(A));

    // Orthonormality and zero lower-left block.
    CHECK((s.P1.transpose() * s.P1 - MatrixXd::Identity(k, k))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK((s.P2.transpose() * s.P2 - MatrixXd::Identity(n - k, n - k))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK((s.P1.transpose() * s.P2).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(spectral_norm(s.P2.transpose() * A * s.P1) < 1e-8 * spectral_norm(A));

    // Invariant split: R Q = I, A Q1 = Q1 N1, A Q2 = Q2 N2.
    MatrixXd Q(n, n), R(n, n);
    Q << s.Q1, s.Q2;
    R << s.R1, s.R2;
    CHECK((R * Q - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(spectral_norm(A * s.Q1 - s.Q1 * s.N1) < 1e-8 * spectral_norm(A));
    CHECK(spectral_norm(A * s.Q2 - s.Q2 * s.N2) < 1e-8 * spectral_norm(A));

    // Block spectra match the sorted split.
    VectorXd m1_eigs = s.M1.eigenvalues().cwiseAbs();
    std::sort(m1_eigs.data(), m1_eigs.data() + k, std::greater<>());
    for (int i = 0; i < k; ++i)
      CHECK(m1_eigs(i) == doctest::Approx(std::abs(s.eigenvalues(i))).epsilon(1e-7));
    CHECK(s.xi >= 0.0);
    CHECK(s.xi < 1.0);
  }
}

TEST_CASE("projector examples") {
  MatrixXd e1(2, 1);
  e1 << 1, 0;
  MatrixXd Pi = projector(e1);
  CHECK(Pi(0, 0) == doctest::Approx(1.0));
  CHECK(Pi(1, 1) == doctest::Approx(0.0));

  const double phi = M_PI / 6;
  MatrixXd v(2, 1);
  v << std::cos(phi), std::sin(phi);
  MatrixXd Pv = projector(v);
  CHECK(Pv(0, 0) == doctest::Approx(0.75));
  CHECK(Pv(0, 1) == doctest::Approx(std::sqrt(3.0) / 4));
  CHECK(Pv(1, 0) == doctest::Approx(std::sqrt(3.0) / 4));
  CHECK(Pv(1, 1) == doctest::Approx(0.25));

  MatrixXd full = MatrixXd::Identity(3, 3);
  CHECK((projector(full) - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-12);

  MatrixXd bad(2, 1);
  bad << 1, 1;
  CHECK_THROWS_AS(projector(bad), Error);
}

TEST_CASE("projector properties: symmetric idempotent with trace k") {
  std::mt19937_64 rng(7);
  for (int n = 2; n <= 6; ++n) {
    for (int k = 1; k < n; ++k) {
      MatrixXd P = random_orthonormal(n, k, rng);
      MatrixXd Pi = projector(P);
      CHECK((Pi - Pi.transpose()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((Pi * Pi - Pi).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(Pi.trace() == doctest::Approx(k).epsilon(1e-9));
    }
  }
}

TEST_CASE("projector_distance examples") {
  MatrixXd d10 = MatrixXd::Zero(2, 2);
  d10(0, 0) = 1;
  CHECK(projector_distance(d10, d10) == doctest::Approx(0.0));

  const double phi = M_PI / 6;
  MatrixXd v(2, 1);
  v << std::cos(phi), std::sin(phi);
  CHECK(projector_distance(d10, projector(v)) ==
        doctest::Approx(std::sin(phi)));

  MatrixXd d01 = MatrixXd::Zero(2, 2);
  d01(1, 1) = 1;
  CHECK(projector_distance(d10, d01) == doctest::Approx(1.0));
}

TEST_CASE("projector_distance equals the largest principal-angle sine") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + trial % 5;
    int k = 1 + trial % std::max(1, n - 1);
    MatrixXd Pa = random_orthonormal(n, k, rng);
    MatrixXd Pb = random_orthonormal(n, k, rng);
    // Oracle: cosines of principal angles are singular values of Pa^T Pb.
    Eigen::JacobiSVD<MatrixXd> svd(Pa.transpose() * Pb);
    double cos_min = svd.singularValues().minCoeff();
    double oracle = std::sqrt(std::max(0.0, 1.0 - cos_min * cos_min));
    double measured = projector_distance(projector(Pa), projector(Pb));
    CHECK(measured == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(measured <= 1.0 + 1e-12);
  }
}

TEST_CASE("basis_align examples") {
  MatrixXd e1(2, 1);
  e1 << 1, 0;
  auto a = basis_align(e1, e1);
  CHECK(a.W(0, 0) == doctest::Approx(1.0));
  CHECK(a.delta == doctest::Approx(0.0));

  auto b = basis_align(e1, MatrixXd(-e1));
  CHECK(b.W(0, 0) == doctest::Approx(-1.0));
  CHECK(b.delta == doctest::Approx(0.0).epsilon(1e-12));

  const double phi = M_PI / 6;
  MatrixXd v(2, 1);
  v << std::cos(phi), std::sin(phi);
  auto c = basis_align(e1, v);
  CHECK(c.delta == doctest::Approx(2.0 * std::sin(phi / 2)));
}

TEST_CASE("basis_align distance within sqrt(2) of the projector distance") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 3 + trial % 4;
    int k = 1 + trial % 3;
    if (k >= n) continue;
    MatrixXd Pa = random_orthonormal(n, k, rng);
    MatrixXd Pb = random_orthonormal(n, k, rng);
    double delta = basis_align(Pa, Pb).delta;
    double dist = projector_distance(projector(Pa), projector(Pb));
    CHECK(delta <= std::sqrt(2.0) * dist + 1e-9);
  }
}

TEST_CASE("gelfand_constant examples and defining inequality") {
  MatrixXd X1(1, 1);
  X1 << 0.9;
  auto g1 = gelfand_constant(X1, 0.1, 64);
  CHECK(g1.zeta == doctest::Approx(1.0));
  CHECK(g1.rho == doctest::Approx(0.9));

  MatrixXd X2(2, 2);
  X2 << 0, 1, 0, 0;
  auto g2 = gelfand_constant(X2, 0.5, 8);
  CHECK(g2.zeta == doctest::Approx(2.0));
  CHECK(g2.rho == doctest::Approx(0.0));

  MatrixXd X3(2, 2);
  X3 << 1, 1, 0, 1;
  auto g3 = gelfand_constant(X3, 1.0, 64);
  CHECK(g3.zeta >= 1.0);
  CHECK(std::isfinite(g3.zeta));

  // Re-assert |X^t| <= zeta (rho+eps)^t for every t up to the horizon.
  std::mt19937_64 rng(5);
  MatrixXd X = random_gaussian(4, 4, rng);
  auto g = gelfand_constant(X, 0.25, 32);
  MatrixXd power = MatrixXd::Identity(4, 4);
  for (int t = 0; t <= 32; ++t) {
    CHECK(spectral_norm(power) <=
          g.zeta * std::pow(g.rho + 0.25, t) * (1 + 1e-9));
    power = power * X;
  }
}

TEST_CASE("spectral_radius examples") {
  MatrixXd A(2, 2);
  A << 2, 0, 0, 0.5;
  CHECK(spectral_radius(A) == doctest::Approx(2.0));
  MatrixXd N(2, 2);
  N << 0, 1, 0, 0;
  CHECK(spectral_radius(N) == doctest::Approx(0.0));
  MatrixXd R(2, 2);
  R << 0, 1, -1, 0;
  CHECK(spectral_radius(R) == doctest::Approx(1.0));
}

TEST_CASE("dlyap_solve examples") {
  MatrixXd A0(1, 1), G(1, 1);
  A0 << 0;
  G << 1;
  CHECK(dlyap_solve(A0, G)(0, 0) == doctest::Approx(1.0));

  MatrixXd Ah(1, 1);
  Ah << 0.5;
  CHECK(dlyap_solve(Ah, G)(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-9));

  MatrixXd Au(1, 1);
  Au << 1.5;
  try {
    dlyap_solve(Au, G);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::not_schur_stable);
  }
}

TEST_CASE("dlyap_solve residual on random stable systems up to dim 16") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + trial % 15;
    MatrixXd A = random_gaussian(n, n, rng);
    A *= 0.9 / std::max(spectral_radius(A), 1e-6);
    MatrixXd Gh = random_gaussian(n, n, rng);
    MatrixXd G = Gh * Gh.transpose() + MatrixXd::Identity(n, n);
    MatrixXd H = dlyap_solve(A, G);
    MatrixXd residual = A.transpose() * H * A + G - H;
    CHECK(residual.cwiseAbs().maxCoeff() <
          1e-8 * std::max(1.0, H.cwiseAbs().maxCoeff()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(H);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("lqr_gain scalar examples") {
  MatrixXd F(1, 1), G(1, 1), Q(1, 1), R(1, 1);
  G << 1;
  Q << 1;
  R << 1;

  F << 2;
  MatrixXd K = lqr_gain(F, G, Q, R);
  CHECK(K(0, 0) == doctest::Approx(-1.6180).epsilon(1e-4));
  CHECK(spectral_radius(F + G * K) == doctest::Approx(0.382).epsilon(1e-3));

  F << 0.5;
  CHECK(lqr_gain(F, G, Q, R)(0, 0) == doctest::Approx(-0.2656).epsilon(1e-3));

  F << 2;
  MatrixXd G0 = MatrixXd::Zero(1, 1);
  try {
    lqr_gain(F, G0, Q, R);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::unstabilizable);
  }
}

TEST_CASE("lqr_gain stabilizes random systems up to dim 16") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + trial % 15;
    int k = 1 + std::min(trial % 4, n - 1);
    int m = std::max(1, k - trial % 2);
    VectorXd lambdas(n);
    for (int i = 0; i < k; ++i) lambdas(i) = 1.4 - 0.07 * i + 0.02 * unif(rng);
    for (int i = k; i < n; ++i) lambdas(i) = 0.85 * std::pow(0.8, i - k);
    MatrixXd F = similarity(lambdas, rng);
    MatrixXd G = random_gaussian(n, m, rng);
    MatrixXd Q = MatrixXd::Identity(n, n);
    MatrixXd R = MatrixXd::Identity(m, m);
    // lqr_gain itself enforces a 1e-9 Riccati residual before returning.
    MatrixXd K = lqr_gain(F, G, Q, R);
    CHECK(spectral_radius(F + G * K) < 1.0);
  }
}

TEST_CASE("vandermonde_inverse_norm examples") {
  VectorXcd two(2);
  two << 2.0, 4.0;
  auto v2 = vandermonde_inverse_norm(two);
  CHECK(v2.exact_norm == doctest::Approx(6.047).epsilon(1e-3));
  CHECK(v2.paper_bound == doctest::Approx(std::pow(2.0, 2.5) / 0.0625));

  VectorXcd one(1);
  one << 2.0;
  auto v1 = vandermonde_inverse_norm(one);
  CHECK(v1.exact_norm == doctest::Approx(1.0));
  CHECK(v1.paper_bound == doctest::Approx(1.0));

  VectorXcd dup(2);
  dup << 2.0, 2.0;
  try {
    vandermonde_inverse_norm(dup);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::degenerate_eigenvalues);
  }
}

TEST_CASE("vandermonde bound holds on 200 random draws") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> mag(1.05, 4.0);
  std::uniform_int_distribution<int> ksize(1, 6);
  int done = 0;
  while (done < 200) {
    int k = ksize(rng);
    VectorXcd lambdas(k);
    bool ok = true;
    for (int i = 0; i < k; ++i) lambdas(i) = mag(rng);
    for (int i = 0; i < k && ok; ++i)
      for (int j = i + 1; j < k && ok; ++j)
        ok = std::abs(lambdas(i) - lambdas(j)) > 1e-3;
    if (!ok) continue;
    auto v = vandermonde_inverse_norm(lambdas);  // throws if bound violated
    CHECK(v.exact_norm <= v.paper_bound * (1 + 1e-9));
    ++done;
  }
}

TEST_CASE("matrix_power examples") {
  MatrixXd D(1, 1);
  D << 2;
  CHECK(matrix_power(D, 3)(0, 0) == doctest::Approx(8.0));
  MatrixXd X(2, 2);
  X << 3, -1, 2, 5;
  CHECK((matrix_power(X, 0) - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);
  MatrixXd J(2, 2);
  J << 1, 1, 0, 1;
  MatrixXd J5 = matrix_power(J, 5);
  CHECK(J5(0, 0) == doctest::Approx(1.0));
  CHECK(J5(0, 1) == doctest::Approx(5.0));
  CHECK(J5(1, 0) == doctest::Approx(0.0));
  CHECK(J5(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("subspace perturbation certificate on random Hermitian pairs") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    int n = 3 + static_cast<int>(unif(rng) * 6);
    int k = 1 + static_cast<int>(unif(rng) * (n - 1));
    MatrixXd Araw = random_gaussian(n, n, rng);
    MatrixXd A = 0.5 * (Araw + Araw.transpose());
    MatrixXd Hraw = random_gaussian(n, n, rng);
    MatrixXd H = 0.05 * (Hraw + Hraw.transpose());

    Eigen::SelfAdjointEigenSolver<MatrixXd> ea(A), eb(A + H);
    // Eigen sorts ascending; top-k eigenvectors are the last k columns.
    MatrixXd U = ea.eigenvectors().rightCols(k);
    MatrixXd V = eb.eigenvectors().rightCols(k);

    // Required separation between the kept eigenvalues of A and the dropped
    // eigenvalues of A + H.
    double sep = std::numeric_limits<double>::infinity();
    for (int i = n - k; i < n; ++i)
      for (int j = 0; j < n - k; ++j)
        sep = std::min(sep,
                       std::abs(ea.eigenvalues()(i) - eb.eigenvalues()(j)));
    if (!(sep > 1e-6)) continue;

    double lhs = projector_distance(projector(U), projector(V));
    double rhs = std::sqrt(2.0 * k) * spectral_norm(H) / sep;
    CHECK(lhs <= rhs + 1e-9);
    ++checked;
  }
}
