#include "lts/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

namespace lts {

const char* errc_name(errc c) {
  switch (c) {
    case errc::non_diagonalizable: return "NonDiagonalizable";
    case errc::distinct_modulus_violated: return "DistinctModulusViolated";
    case errc::modulus_on_unit_circle: return "ModulusOnUnitCircle";
    case errc::bad_instability_index: return "BadInstabilityIndex";
    case errc::not_orthonormal: return "NotOrthonormal";
    case errc::not_schur_stable: return "NotSchurStable";
    case errc::unstabilizable: return "Unstabilizable";
    case errc::degenerate_eigenvalues: return "DegenerateEigenvalues";
    case errc::rank_deficient: return "RankDeficient";
    case errc::singular_gram: return "SingularGram";
    case errc::overflow: return "Overflow";
    case errc::zero_state: return "ZeroState";
    case errc::generation_failed: return "GenerationFailed";
    case errc::gap_violated: return "GapViolated";
    case errc::invalid_spectrum: return "InvalidSpectrum";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::invalid_argument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace lts

namespace lts::spectral {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

constexpr double kModulusTieTol = 1e-9;
constexpr double kOrthonormalTol = 1e-9;
constexpr double kEigvecCondLimit = 1e12;

void require_square(const MatrixXd& A, const char* who) {
  if (A.rows() == 0 || A.rows() != A.cols())
    throw Error(errc::dimension_mismatch,
                std::string(who) + " requires a nonempty square matrix");
  if (!A.allFinite())
    throw Error(errc::invalid_argument,
                std::string(who) + " requires finite entries");
}

// Flips column signs so the largest-magnitude entry of each column is
// positive; makes bases deterministic across decompositions.
void sign_normalize_columns(MatrixXd& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Eigen::Index imax = 0;
    V.col(j).cwiseAbs().maxCoeff(&imax);
    if (V(imax, j) < 0.0) V.col(j) = -V.col(j);
  }
}

// Thin Q factor with positive diagonal of R, so the result is a deterministic
// orthonormal basis of col(X).
MatrixXd orthonormal_basis(const MatrixXd& X) {
  Eigen::HouseholderQR<MatrixXd> qr(X);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(X.rows(), X.cols());
  MatrixXd R = qr.matrixQR()
                   .topRows(X.cols())
                   .triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

// Orthonormal basis of the orthogonal complement of col(P), P orthonormal.
MatrixXd orthonormal_complement(const MatrixXd& P) {
  const Eigen::Index n = P.rows(), k = P.cols();
  Eigen::HouseholderQR<MatrixXd> qr(P);
  MatrixXd Qfull = qr.householderQ() * MatrixXd::Identity(n, n);
  MatrixXd C = Qfull.rightCols(n - k);
  sign_normalize_columns(C);
  return C;
}

void require_orthonormal(const MatrixXd& P, const char* who) {
  if (P.rows() < P.cols() || P.cols() < 1)
    throw Error(errc::not_orthonormal,
                std::string(who) + ": basis must be tall (n >= k >= 1)");
  MatrixXd G = P.transpose() * P;
  G.diagonal().array() -= 1.0;
  if (G.cwiseAbs().maxCoeff() > 1e-8)
    throw Error(errc::not_orthonormal,
                std::string(who) + ": columns are not orthonormal");
}

void require_projector(const MatrixXd& Pi, const char* who) {
  require_square(Pi, who);
  if ((Pi - Pi.transpose()).cwiseAbs().maxCoeff() > 1e-6)
    throw Error(errc::invalid_argument,
                std::string(who) + ": matrix is not symmetric");
  if ((Pi * Pi - Pi).cwiseAbs().maxCoeff() > 1e-6)
    throw Error(errc::invalid_argument,
                std::string(who) + ": matrix is not idempotent");
}

}  // namespace

double spectral_norm(const MatrixXd& X) {
  if (X.size() == 0) return 0.0;
  if (!X.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::BDCSVD<MatrixXd> svd(X);
  return svd.singularValues()(0);
}

double spectral_radius(const MatrixXd& X) {
  require_square(X, "spectral_radius");
  return X.eigenvalues().cwiseAbs().maxCoeff();
}

EigSorted eig_sorted(const MatrixXd& A) {
  require_square(A, "eig_sorted");
  const Eigen::Index n = A.rows();

  Eigen::EigenSolver<MatrixXd> es(A);
  if (es.info() != Eigen::Success)
    throw Error(errc::non_diagonalizable, "eigen decomposition failed");

  VectorXcd vals = es.eigenvalues();
  MatrixXcd vecs = es.eigenvectors();

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    double ma = std::abs(vals(a)), mb = std::abs(vals(b));
    if (ma != mb) return ma > mb;
    if (vals(a).real() != vals(b).real()) return vals(a).real() > vals(b).real();
    return vals(a).imag() > vals(b).imag();
  });

  VectorXcd sorted_vals(n);
  for (Eigen::Index i = 0; i < n; ++i) sorted_vals(i) = vals(order[i]);

  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (std::abs(std::abs(sorted_vals(i)) - std::abs(sorted_vals(i + 1))) <
        kModulusTieTol)
      throw Error(errc::distinct_modulus_violated,
                  "two eigenvalue moduli coincide within 1e-9");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(std::abs(sorted_vals(i)) - 1.0) < kModulusTieTol)
      throw Error(errc::modulus_on_unit_circle,
                  "eigenvalue modulus within 1e-9 of 1");
  }

  // Pairwise-distinct moduli exclude complex-conjugate pairs, so the spectrum
  // is real and the eigenvectors can be realified directly.
  MatrixXd rvecs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXcd c = vecs.col(order[i]);
    if (c.imag().cwiseAbs().maxCoeff() > 1e-7 * std::max(1.0, c.norm()))
      throw Error(errc::non_diagonalizable,
                  "unexpected complex eigenvector for real spectrum");
    VectorXd v = c.real();
    double nv = v.norm();
    if (nv == 0.0)
      throw Error(errc::non_diagonalizable, "null eigenvector");
    rvecs.col(i) = v / nv;
  }
  sign_normalize_columns(rvecs);

  Eigen::BDCSVD<MatrixXd> svd(rvecs);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > kEigvecCondLimit)
    throw Error(errc::non_diagonalizable,
                "eigenvector matrix is numerically singular");

  return EigSorted{std::move(sorted_vals), std::move(rvecs)};
}

SpectralSplit invariant_split(const MatrixXd& A, int k) {
  EigSorted es = eig_sorted(A);
  const int n = static_cast<int>(A.rows());
  if (k < 1 || k > n - 1)
    throw Error(errc::bad_instability_index,
                "k must satisfy 1 <= k <= n-1");
  if (!(std::abs(es.values(k - 1)) > 1.0))
    throw Error(errc::bad_instability_index, "|lambda_k| must exceed 1");
  if (!(std::abs(es.values(k)) < 1.0))
    throw Error(errc::bad_instability_index, "|lambda_{k+1}| must be below 1");

  SpectralSplit s;
  s.eigenvalues = es.values;
  s.k = k;

  s.Q1 = orthonormal_basis(es.vectors.leftCols(k));
  s.Q2 = orthonormal_basis(es.vectors.rightCols(n - k));

  MatrixXd Q(n, n);
  Q << s.Q1, s.Q2;
  Eigen::FullPivLU<MatrixXd> lu(Q);
  if (!lu.isInvertible())
    throw Error(errc::non_diagonalizable,
                "invariant bases are numerically dependent");
  MatrixXd R = lu.inverse();
  s.R1 = R.topRows(k);
  s.R2 = R.bottomRows(n - k);
  s.N1 = s.R1 * A * s.Q1;
  s.N2 = s.R2 * A * s.Q2;

  s.P1 = s.Q1;
  s.P2 = orthonormal_complement(s.P1);
  s.M1 = s.P1.transpose() * A * s.P1;
  s.Delta = s.P1.transpose() * A * s.P2;
  s.M2 = s.P2.transpose() * A * s.P2;

  Eigen::BDCSVD<MatrixXd> overlap(s.P2.transpose() * s.Q2);
  const auto& sv = overlap.singularValues();
  s.xi = std::max(0.0, 1.0 - sv(sv.size() - 1));
  return s;
}

MatrixXd projector(const MatrixXd& P) {
  if (P.rows() < P.cols() || P.cols() < 1)
    throw Error(errc::not_orthonormal, "projector: basis must be n x k, n >= k");
  MatrixXd G = P.transpose() * P;
  G.diagonal().array() -= 1.0;
  if (G.cwiseAbs().maxCoeff() > kOrthonormalTol)
    throw Error(errc::not_orthonormal, "projector: basis is not orthonormal");
  return P * P.transpose();
}

double projector_distance(const MatrixXd& Pi_a, const MatrixXd& Pi_b) {
  require_projector(Pi_a, "projector_distance");
  require_projector(Pi_b, "projector_distance");
  if (Pi_a.rows() != Pi_b.rows())
    throw Error(errc::dimension_mismatch,
                "projector_distance: size mismatch");
  return spectral_norm(Pi_a - Pi_b);
}

BasisAlignment basis_align(const MatrixXd& P, const MatrixXd& P_hat) {
  require_orthonormal(P, "basis_align");
  require_orthonormal(P_hat, "basis_align");
  if (P.rows() != P_hat.rows() || P.cols() != P_hat.cols())
    throw Error(errc::dimension_mismatch, "basis_align: shape mismatch");

  Eigen::JacobiSVD<MatrixXd> svd(P.transpose() * P_hat,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  BasisAlignment out;
  out.W = svd.matrixU() * svd.matrixV().transpose();
  out.delta = spectral_norm(P * out.W - P_hat);
  return out;
}

GelfandEstimate gelfand_constant(const MatrixXd& X, double epsilon,
                                 int horizon) {
  require_square(X, "gelfand_constant");
  if (epsilon <= 0.0)
    throw Error(errc::invalid_argument, "gelfand_constant: epsilon must be > 0");
  if (horizon < 1)
    throw Error(errc::invalid_argument, "gelfand_constant: horizon must be >= 1");

  GelfandEstimate g;
  g.epsilon = epsilon;
  g.horizon = horizon;
  g.rho = spectral_radius(X);
  const double base = g.rho + epsilon;

  double zeta = 1.0;  // t = 0 term
  MatrixXd power = MatrixXd::Identity(X.rows(), X.cols());
  double denom = 1.0;
  for (int t = 1; t <= horizon; ++t) {
    power = power * X;
    denom *= base;
    if (!power.allFinite() || !std::isfinite(denom)) break;
    zeta = std::max(zeta, spectral_norm(power) / denom);
  }
  g.zeta = zeta;
  return g;
}

MatrixXd dlyap_solve(const MatrixXd& Acl, const MatrixXd& G) {
  require_square(Acl, "dlyap_solve");
  require_square(G, "dlyap_solve");
  if (Acl.rows() != G.rows())
    throw Error(errc::dimension_mismatch, "dlyap_solve: size mismatch");
  if ((G - G.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, G.cwiseAbs().maxCoeff()))
    throw Error(errc::invalid_argument, "dlyap_solve: G must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> gev(G);
  if (gev.eigenvalues().minCoeff() <= 0.0)
    throw Error(errc::invalid_argument,
                "dlyap_solve: G must be positive definite");
  if (spectral_radius(Acl) >= 1.0)
    throw Error(errc::not_schur_stable,
                "dlyap_solve: rho(Acl) must be < 1");

  // Doubling iteration for H = sum_j (Acl^T)^j G Acl^j; the contraction rate
  // squares every step, so convergence is fast even near rho = 1.
  MatrixXd H = G;
  MatrixXd S = Acl;
  for (int it = 0; it < 128; ++it) {
    MatrixXd incr = S.transpose() * H * S;
    H += incr;
    if (incr.cwiseAbs().maxCoeff() <= 1e-16 * H.cwiseAbs().maxCoeff()) break;
    S = S * S;
  }
  H = 0.5 * (H + H.transpose());

  MatrixXd residual = Acl.transpose() * H * Acl + G - H;
  if (residual.cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, H.cwiseAbs().maxCoeff()))
    throw Error(errc::not_schur_stable, "dlyap_solve: iteration did not converge");
  return H;
}

MatrixXd lqr_gain(const MatrixXd& F, const MatrixXd& G, const MatrixXd& Q,
                  const MatrixXd& R) {
  require_square(F, "lqr_gain");
  const Eigen::Index k = F.rows();
  if (G.rows() != k || G.cols() < 1)
    throw Error(errc::dimension_mismatch, "lqr_gain: G must be k x m");
  const Eigen::Index m = G.cols();
  if (Q.rows() != k || Q.cols() != k || R.rows() != m || R.cols() != m)
    throw Error(errc::dimension_mismatch, "lqr_gain: weight size mismatch");

  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  MatrixXd P = Q;
  bool converged = false;
  for (int it = 0; it < 20000; ++it) {
    MatrixXd GtP = G.transpose() * P;
    MatrixXd inner = R + GtP * G;
    Eigen::LDLT<MatrixXd> ldlt(inner);
    if (ldlt.info() != Eigen::Success)
      throw Error(errc::unstabilizable, "lqr_gain: inner solve failed");
    MatrixXd Pn = F.transpose() * P * F -
                  (F.transpose() * GtP.transpose()) * ldlt.solve(GtP * F) + Q;
    // Rounding feeds an antisymmetric component that evolves under the open
    // loop and explodes; project back onto symmetric matrices every step.
    Pn = 0.5 * (Pn + Pn.transpose());
    double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = std::move(Pn);
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 1e100)
      throw Error(errc::unstabilizable, "lqr_gain: Riccati iteration diverged");
    if (diff <= 1e-12 * std::max(scale, P.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw Error(errc::unstabilizable, "lqr_gain: Riccati iteration stalled");

  MatrixXd GtP = G.transpose() * P;
  MatrixXd residual = F.transpose() * P * F - P -
                      (F.transpose() * GtP.transpose()) *
                          (R + GtP * G).ldlt().solve(GtP * F) +
                      Q;
  if (residual.cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, P.cwiseAbs().maxCoeff()))
    throw Error(errc::unstabilizable, "lqr_gain: Riccati residual too large");

  MatrixXd K = -(R + GtP * G).ldlt().solve(GtP * F);
  if (spectral_radius(F + G * K) >= 1.0)
    throw Error(errc::unstabilizable, "lqr_gain: closed loop is not Schur stable");
  return K;
}

VandermondeNorm vandermonde_inverse_norm(const VectorXcd& lambdas) {
  const Eigen::Index k = lambdas.size();
  if (k < 1)
    throw Error(errc::invalid_argument, "vandermonde: need at least one value");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(lambdas(i)) < 1e-300)
      throw Error(errc::degenerate_eigenvalues, "vandermonde: zero value");
    for (Eigen::Index j = i + 1; j < k; ++j)
      if (std::abs(lambdas(i) - lambdas(j)) < 1e-12)
        throw Error(errc::degenerate_eigenvalues,
                    "vandermonde: coincident values");
  }

  MatrixXcd V(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::complex<double> inv = 1.0 / lambdas(i);
    std::complex<double> p = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      V(i, j) = p;
      p *= inv;
    }
  }

  Eigen::JacobiSVD<MatrixXcd> svd(V);
  double smin = svd.singularValues()(k - 1);
  if (smin <= 0.0)
    throw Error(errc::degenerate_eigenvalues, "vandermonde: singular matrix");

  double gap = 1.0;
  {
    std::complex<double> prod = 1.0;
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b)
        if (a != b) prod *= (1.0 / lambdas(a) - 1.0 / lambdas(b));
    gap = std::abs(prod);
  }

  VandermondeNorm out;
  out.exact_norm = 1.0 / smin;
  out.paper_bound = std::pow(static_cast<double>(k), k / 2.0 + 1.5) / gap;
  if (out.exact_norm > out.paper_bound * (1.0 + 1e-9))
    throw std::logic_error("vandermonde_inverse_norm: bound violated");
  return out;
}

MatrixXd matrix_power(const MatrixXd& X, long t) {
  require_square(X, "matrix_power");
  if (t < 0)
    throw Error(errc::invalid_argument, "matrix_power: negative exponent");
  MatrixXd result = MatrixXd::Identity(X.rows(), X.cols());
  MatrixXd base = X;
  long e = t;
  while (e > 0) {
    if (e & 1) result = result * base;
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return result;
}

}  // namespace lts::spectral
