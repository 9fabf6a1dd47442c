#include "lts/lts0n.hpp"

#include <cmath>
#include <utility>

#include "lts/rng.hpp"

namespace lts::lts0n {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void Config::validate() const {
  if (k_hat < 1) throw Error(errc::invalid_argument, "config: k_hat must be >= 1");
  if (T < k_hat)
    throw Error(errc::invalid_argument, "config: T must be >= k_hat");
  if (tau < 1) throw Error(errc::invalid_argument, "config: tau must be >= 1");
  if (alpha < 0.0)
    throw Error(errc::invalid_argument, "config: alpha must be positive (0 = auto)");
  if (!(epsilon > 0.0) || !(gamma > epsilon))
    throw Error(errc::invalid_argument, "config: need gamma > epsilon > 0");
  if (delta < 0.0)
    throw Error(errc::invalid_argument, "config: delta must be positive (0 = auto)");
  if (omega_max < 0)
    throw Error(errc::invalid_argument, "config: omega_max must be >= 1 (0 = auto)");
  if (!(lqr_q > 0.0) || !(lqr_r > 0.0))
    throw Error(errc::invalid_argument, "config: LQR weights must be positive");
  if (!(guard > 0.0))
    throw Error(errc::invalid_argument, "config: guard must be positive");
  if (post_horizon < 0)
    throw Error(errc::invalid_argument, "config: post_horizon must be >= 0");
}

double Config::resolved_delta() const {
  return delta > 0.0 ? delta : std::sqrt(2.0 * k_hat) * epsilon;
}

int Config::resolved_omega_max() const {
  return omega_max > 0 ? omega_max : 50 * T;
}

int Config::resolved_post_horizon() const {
  return post_horizon > 0 ? post_horizon : 10 * T;
}

TrajectoryCursor::TrajectoryCursor(const plant::LtiPlant& plant,
                                   Eigen::VectorXd x0, std::uint64_t seed,
                                   double guard)
    : plant_(plant),
      rng_(make_rng(seed)),
      guard_(guard),
      zero_u_(VectorXd::Zero(plant.m())) {
  log_.start(std::move(x0), plant::Phase::stage1);
}

void TrajectoryCursor::advance(const VectorXd& u, plant::Phase phase) {
  VectorXd x = plant::step(plant_, log_.states.back(), u, rng_);
  log_.append(std::move(x), u, phase);
  if (!(log_.norms.back() <= guard_))
    throw plant::OverflowError(std::move(log_), time());
}

void TrajectoryCursor::advance_zero(plant::Phase phase) {
  advance(zero_u_, phase);
}

Stage1Result stage1_estimate_subspace(const Eigen::MatrixXd& D, int k_hat) {
  const Eigen::Index n = D.rows(), T = D.cols();
  if (k_hat < 1 || T < k_hat || n < k_hat)
    throw Error(errc::invalid_argument,
                "stage1: need 1 <= k_hat <= min(n, T)");
  if (!D.allFinite())
    throw Error(errc::invalid_argument, "stage1: data matrix must be finite");

  Eigen::BDCSVD<MatrixXd> svd(D, Eigen::ComputeThinU);
  VectorXd sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(k_hat - 1) < 1e-12 * sv(0))
    throw Error(errc::rank_deficient,
                "stage1: top-k singular subspace is not excited");

  Stage1Result out;
  out.D = D;
  out.singular_values = std::move(sv);
  MatrixXd P = svd.matrixU().leftCols(k_hat);
  for (Eigen::Index j = 0; j < P.cols(); ++j) {
    Eigen::Index imax = 0;
    P.col(j).cwiseAbs().maxCoeff(&imax);
    if (P(imax, j) < 0.0) P.col(j) = -P.col(j);
  }
  out.Pi1_hat = P * P.transpose();
  out.P1_hat = std::move(P);
  return out;
}

Stage2Result stage2_least_squares(const Eigen::MatrixXd& states,
                                  const Eigen::MatrixXd& P1_hat) {
  const Eigen::Index L = states.cols() - 1;
  if (L < 1)
    throw Error(errc::invalid_argument, "stage2: need at least two states");
  if (states.rows() != P1_hat.rows())
    throw Error(errc::dimension_mismatch, "stage2: basis/state size mismatch");

  // Projected regressors and targets; the fit is the least-squares solution
  // of Y_next ~ M * Y, computed through the pseudo-inverse of Y so the
  // conditioning enters linearly rather than squared.
  MatrixXd Y = P1_hat.transpose() * states.leftCols(L);
  MatrixXd Ynext = P1_hat.transpose() * states.rightCols(L);

  Eigen::BDCSVD<MatrixXd> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const Eigen::Index k = Y.rows();
  if (sv(0) <= 0.0 || sv(k - 1) < 1e-6 * sv(0))
    throw Error(errc::singular_gram,
                "stage2: projected data does not span the subspace");

  MatrixXd pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() *
                  svd.matrixU().transpose();
  Stage2Result out;
  out.M1_hat = Ynext * pinv;
  return out;
}

Stage3Result stage3_estimate_Btau(TrajectoryCursor& cursor,
                                  const Eigen::MatrixXd& P1_hat,
                                  const Eigen::MatrixXd& M1_hat,
                                  const Config& cfg, double noise_C,
                                  double alpha,
                                  int first_column_wait_offset) {
  const int m = cursor.plant().m();
  const int k_hat = static_cast<int>(P1_hat.cols());
  const double delta = cfg.resolved_delta();
  const int omega_max = cfg.resolved_omega_max();
  const double wait_ratio = (1.0 - cfg.epsilon) * cfg.gamma;
  if (!(alpha > 0.0))
    throw Error(errc::invalid_argument, "stage3: alpha must be positive");

  const MatrixXd M1_tau = spectral::matrix_power(M1_hat, cfg.tau);

  // Both stopping predicates from the probing rule: the component outside the
  // estimated subspace must be a small fraction of the state, and the state
  // must dominate the noise bound.
  auto gate = [&](const VectorXd& x) {
    double nx = x.norm();
    if (nx < 1e-300) return false;
    VectorXd residual = x - P1_hat * (P1_hat.transpose() * x);
    return residual.norm() / nx < wait_ratio && noise_C / nx < delta;
  };

  Stage3Result out;
  out.B_tau_hat.resize(k_hat, m);
  for (int i = 0; i < m; ++i) {
    int omega = (i == 0) ? first_column_wait_offset : 0;
    while (!gate(cursor.state()) && omega < omega_max) {
      cursor.advance_zero(plant::Phase::stage3_wait);
      ++omega;
    }
    out.status.push_back(gate(cursor.state())
                             ? ColumnStatus::probed
                             : ColumnStatus::stable_system_detected);
    out.omegas.push_back(omega);

    const VectorXd x_probe = cursor.state();
    const double nx = x_probe.norm();
    out.probe_times.push_back(cursor.time());
    out.probe_state_norms.push_back(nx);
    if (nx < 1e-300)
      throw Error(errc::zero_state, "stage3: probe state is numerically zero");

    VectorXd u = VectorXd::Zero(m);
    u(i) = alpha * nx;
    cursor.advance(u, plant::Phase::stage3_probe);
    for (int j = 1; j < cfg.tau; ++j)
      cursor.advance_zero(plant::Phase::stage3_probe);

    out.B_tau_hat.col(i) =
        (P1_hat.transpose() * cursor.state() -
         M1_tau * (P1_hat.transpose() * x_probe)) /
        (alpha * nx);
  }
  return out;
}

Stage4Result stage4_synthesize(const Eigen::MatrixXd& M1_hat,
                               const Eigen::MatrixXd& B_tau_hat, int tau,
                               double lqr_q, double lqr_r) {
  const Eigen::Index k = M1_hat.rows();
  if (M1_hat.cols() != k || B_tau_hat.rows() != k)
    throw Error(errc::dimension_mismatch, "stage4: shape mismatch");
  const Eigen::Index m = B_tau_hat.cols();

  Stage4Result out;
  MatrixXd M_tau = spectral::matrix_power(M1_hat, tau);
  out.K1_hat = spectral::lqr_gain(M_tau, B_tau_hat,
                                  lqr_q * MatrixXd::Identity(k, k),
                                  lqr_r * MatrixXd::Identity(m, m));
  MatrixXd Acl = M_tau + B_tau_hat * out.K1_hat;
  out.closed_loop_rho = spectral::spectral_radius(Acl);

  // Certificate with sigma_min(G) > 2, so the H-weighted norm of the closed
  // loop falls strictly below 1.
  out.lyapunov_H =
      spectral::dlyap_solve(Acl, 2.01 * MatrixXd::Identity(k, k));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out.lyapunov_H);
  MatrixXd H_half = eig.operatorSqrt();
  MatrixXd H_half_inv = eig.operatorInverseSqrt();
  out.weighted_norm_U = spectral::spectral_norm(H_half * Acl * H_half_inv);
  return out;
}

const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::complete: return "complete";
    case RunStatus::overflow: return "overflow";
    case RunStatus::stage_error: return "stage-error";
  }
  return "unknown";
}

RunResult run_lts0n(const plant::LtiPlant& plant, const Config& cfg) {
  cfg.validate();
  const int n = plant.n();
  const int m = plant.m();
  if (cfg.k_hat > n)
    throw Error(errc::invalid_argument, "config: k_hat exceeds state dimension");
  if (cfg.x0.size() != 0 && cfg.x0.size() != n)
    throw Error(errc::dimension_mismatch, "config: x0 dimension mismatch");

  const double norm_B = spectral::spectral_norm(plant.B);
  double alpha = cfg.alpha;
  if (alpha == 0.0) alpha = 0.5 / std::max(norm_B, 1e-12);
  if (plant.truth && cfg.alpha > 0.0 && !(cfg.alpha < 1.0 / norm_B))
    throw Error(errc::invalid_argument,
                "config: alpha must be below 1/|B| for this plant");

  RunResult result;
  result.resolved_alpha = alpha;
  result.resolved_delta = cfg.resolved_delta();
  result.resolved_omega_max = cfg.resolved_omega_max();
  result.resolved_post_horizon = cfg.resolved_post_horizon();

  VectorXd x0 = cfg.x0.size() ? cfg.x0 : VectorXd::Zero(n);
  TrajectoryCursor cursor(plant, std::move(x0), cfg.seed, cfg.guard);
  const double noise_C = plant.noise_bound();

  try {
    for (int t = 0; t < cfg.T; ++t)
      cursor.advance_zero(plant::Phase::stage1);

    MatrixXd D(n, cfg.T);
    for (int t = 1; t <= cfg.T; ++t) D.col(t - 1) = cursor.log().states[t];
    result.stage1 = stage1_estimate_subspace(D, cfg.k_hat);
    const MatrixXd& P1_hat = result.stage1->P1_hat;

    // One extra open-loop step supplies the final regression target; it is
    // the first wait step of the first probe column.
    cursor.advance_zero(plant::Phase::stage3_wait);
    MatrixXd S(n, cfg.T + 1);
    for (int t = 1; t <= cfg.T + 1; ++t) S.col(t - 1) = cursor.log().states[t];
    result.stage2 = stage2_least_squares(S, P1_hat);
    result.stage2->varpi =
        result.stage2->M1_hat - P1_hat.transpose() * plant.A * P1_hat;

    result.stage3 = stage3_estimate_Btau(cursor, P1_hat,
                                         result.stage2->M1_hat, cfg, noise_C,
                                         alpha, /*first_column_wait_offset=*/1);

    result.stage4 = stage4_synthesize(result.stage2->M1_hat,
                                      result.stage3->B_tau_hat, cfg.tau,
                                      cfg.lqr_q, cfg.lqr_r);

    result.learning_steps = cursor.time();
    const MatrixXd& K1 = result.stage4->K1_hat;
    const VectorXd zero_u = VectorXd::Zero(m);
    for (int s = 0; s < result.resolved_post_horizon; ++s) {
      VectorXd u = (s % cfg.tau == 0)
                       ? VectorXd(K1 * (P1_hat.transpose() * cursor.state()))
                       : zero_u;
      cursor.advance(u, plant::Phase::closed_loop);
    }
    result.status = RunStatus::complete;
    result.log = cursor.take_log();
  } catch (const plant::OverflowError& e) {
    result.status = RunStatus::overflow;
    result.error = e.what();
    result.log = e.partial();
    result.learning_steps =
        result.stage4 ? result.learning_steps : result.log.length() - 1;
  } catch (const Error& e) {
    result.status = RunStatus::stage_error;
    result.error = e.what();
    result.log = cursor.take_log();
    result.learning_steps = result.log.length() - 1;
  }
  return result;
}

LhatBlocks closed_loop_matrix_Lhat(const spectral::SpectralSplit& truth,
                                   const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& P1_hat,
                                   const Eigen::MatrixXd& K1_hat, int tau) {
  if (tau < 1)
    throw Error(errc::invalid_argument, "closed_loop_matrix: tau must be >= 1");
  const int n = truth.n();
  const int k = truth.k;
  if (P1_hat.rows() != n || B.rows() != n || K1_hat.cols() != P1_hat.cols() ||
      K1_hat.rows() != B.cols())
    throw Error(errc::dimension_mismatch, "closed_loop_matrix: shape mismatch");

  // tau-step blocks of the orthogonal split, taken from the powered block
  // form so the cross term matches the recursion exactly.
  MatrixXd M(n, n);
  M.setZero();
  M.topLeftCorner(k, k) = truth.M1;
  M.topRightCorner(k, n - k) = truth.Delta;
  M.bottomRightCorner(n - k, n - k) = truth.M2;
  MatrixXd M_tau = spectral::matrix_power(M, tau);

  // A^{tau-1} B reconstructed from the split.
  MatrixXd P(n, n);
  P << truth.P1, truth.P2;
  MatrixXd A = P * M * P.transpose();
  MatrixXd AB = spectral::matrix_power(A, tau - 1) * B;

  MatrixXd G1 = truth.P1.transpose() * AB * K1_hat;  // k x k_hat
  MatrixXd G2 = truth.P2.transpose() * AB * K1_hat;  // (n-k) x k_hat
  MatrixXd C1 = P1_hat.transpose() * truth.P1;       // k_hat x k
  MatrixXd C2 = P1_hat.transpose() * truth.P2;       // k_hat x (n-k)

  LhatBlocks out;
  out.L11 = M_tau.topLeftCorner(k, k) + G1 * C1;
  out.L12 = M_tau.topRightCorner(k, n - k) + G1 * C2;
  out.L21 = G2 * C1;
  out.L22 = M_tau.bottomRightCorner(n - k, n - k) + G2 * C2;
  out.L.resize(n, n);
  out.L << out.L11, out.L12, out.L21, out.L22;
  out.rho = spectral::spectral_radius(out.L);
  out.offdiag_norm_product =
      spectral::spectral_norm(out.L12) * spectral::spectral_norm(out.L21);
  return out;
}

}  // namespace lts::lts0n
