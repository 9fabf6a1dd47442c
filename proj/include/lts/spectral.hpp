#pragma once

#include <Eigen/Dense>

#include "lts/errors.hpp"

namespace lts::spectral {

// Eigen-decomposition of a real matrix whose eigenvalue moduli are pairwise
// distinct. Values are sorted by strictly decreasing modulus; eigenvector
// columns are unit-norm with their largest-magnitude entry positive.
struct EigSorted {
  Eigen::VectorXcd values;
  Eigen::MatrixXd vectors;
};

EigSorted eig_sorted(const Eigen::MatrixXd& A);

// Joint description of the two state-space decompositions of a matrix with k
// expanding directions:
//   * orthogonal split: A [P1 P2] = [P1 P2] [[M1, Delta], [0, M2]]
//   * invariant  split: A Q1 = Q1 N1, A Q2 = Q2 N2, [R1; R2] = [Q1 Q2]^{-1}
// xi in [0,1) measures how far col(P2) and col(Q2) are from coinciding,
// xi = 1 - sigma_min(P2^T Q2).
struct SpectralSplit {
  Eigen::VectorXcd eigenvalues;
  int k = 0;
  Eigen::MatrixXd P1, P2;
  Eigen::MatrixXd M1, M2, Delta;
  Eigen::MatrixXd Q1, Q2;
  Eigen::MatrixXd R1, R2;
  Eigen::MatrixXd N1, N2;
  double xi = 0.0;

  int n() const { return static_cast<int>(P1.rows()); }
};

SpectralSplit invariant_split(const Eigen::MatrixXd& A, int k);

// P P^T for an orthonormal P (n x k). Symmetric, idempotent, trace k.
Eigen::MatrixXd projector(const Eigen::MatrixXd& P);

// Spectral norm of the difference of two orthogonal projectors; equals the
// sine of the largest principal angle when both have the same rank.
double projector_distance(const Eigen::MatrixXd& Pi_a,
                          const Eigen::MatrixXd& Pi_b);

// Orthogonal Procrustes alignment: W minimizes |P W - P_hat| over orthogonal
// W, delta is the attained spectral-norm distance.
struct BasisAlignment {
  Eigen::MatrixXd W;
  double delta = 0.0;
};

BasisAlignment basis_align(const Eigen::MatrixXd& P,
                           const Eigen::MatrixXd& P_hat);

// Finite-horizon constant zeta such that |X^t| <= zeta * (rho(X)+epsilon)^t
// for all 0 <= t <= horizon.
struct GelfandEstimate {
  double epsilon = 0.0;
  int horizon = 0;
  double zeta = 1.0;
  double rho = 0.0;
};

GelfandEstimate gelfand_constant(const Eigen::MatrixXd& X, double epsilon,
                                 int horizon = 256);

double spectral_radius(const Eigen::MatrixXd& X);

// Largest singular value (L2 operator norm).
double spectral_norm(const Eigen::MatrixXd& X);

// Unique H = H^T > 0 with Acl^T H Acl + G - H = 0, for rho(Acl) < 1 and
// symmetric positive-definite G.
Eigen::MatrixXd dlyap_solve(const Eigen::MatrixXd& Acl,
                            const Eigen::MatrixXd& G);

// Infinite-horizon discrete LQR gain K for x' = F x + G u, cost x^T Q x +
// u^T R u, returned with the sign convention that F + G K is the closed loop.
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

// Exact inverse norm of the k x k matrix with rows (1, l_i^-1, ..., l_i^-k+1)
// together with the k^(k/2+3/2)/gap upper bound, where gap is the modulus of
// the product of pairwise differences of the inverted values.
struct VandermondeNorm {
  double exact_norm = 0.0;
  double paper_bound = 0.0;
};

VandermondeNorm vandermonde_inverse_norm(const Eigen::VectorXcd& lambdas);

// X^t by repeated squaring, X^0 = I.
Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& X, long t);

}  // namespace lts::spectral
