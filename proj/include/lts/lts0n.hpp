#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lts/plant.hpp"
#include "lts/spectral.hpp"

namespace lts::lts0n {

// Tunables of the four-stage learner. Fields set to zero are resolved at run
// time: alpha from 0.5/|B|, delta from sqrt(2 k_hat)*epsilon, omega_max from
// 50*T, post_horizon from 10*T.
struct Config {
  int T = 40;
  int k_hat = 1;
  int tau = 3;
  double alpha = 0.0;
  double gamma = 0.15;
  double epsilon = 0.1;
  double delta = 0.0;
  int omega_max = 0;
  double lqr_q = 1.0;
  double lqr_r = 1.0;
  double guard = plant::kDefaultGuard;
  std::uint64_t seed = 1;
  int post_horizon = 0;
  Eigen::VectorXd x0;  // empty = origin

  void validate() const;
  double resolved_delta() const;
  int resolved_omega_max() const;
  int resolved_post_horizon() const;
};

// Single continuous trajectory shared by all stages. advance() samples noise,
// appends to the log, and trips the guard.
class TrajectoryCursor {
 public:
  TrajectoryCursor(const plant::LtiPlant& plant, Eigen::VectorXd x0,
                   std::uint64_t seed, double guard);

  const Eigen::VectorXd& state() const { return log_.states.back(); }
  int time() const { return log_.length() - 1; }

  void advance(const Eigen::VectorXd& u, plant::Phase phase);
  void advance_zero(plant::Phase phase);

  const plant::TrajectoryLog& log() const { return log_; }
  plant::TrajectoryLog take_log() { return std::move(log_); }
  const plant::LtiPlant& plant() const { return plant_; }

 private:
  const plant::LtiPlant& plant_;
  plant::TrajectoryLog log_;
  std::mt19937_64 rng_;
  double guard_;
  Eigen::VectorXd zero_u_;
};

struct Stage1Result {
  Eigen::MatrixXd D;                 // n x T data matrix
  Eigen::VectorXd singular_values;   // all min(n,T) values, nonincreasing
  Eigen::MatrixXd P1_hat;            // n x k_hat, columns sign-normalized
  Eigen::MatrixXd Pi1_hat;           // P1_hat P1_hat^T
};

// Dominant left singular subspace of the open-loop data matrix.
Stage1Result stage1_estimate_subspace(const Eigen::MatrixXd& D, int k_hat);

struct Stage2Result {
  Eigen::MatrixXd M1_hat;
  // Regression residual M1_hat - P1_hat^T A P1_hat; diagnostic, filled when
  // the true A is at hand.
  std::optional<Eigen::MatrixXd> varpi;
};

// Least-squares fit of the projected one-step dynamics. states holds
// x_first .. x_last as columns; every column but the last is a regressor and
// must be exactly the column set of the matrix stage 1 decomposed.
Stage2Result stage2_least_squares(const Eigen::MatrixXd& states,
                                  const Eigen::MatrixXd& P1_hat);

enum class ColumnStatus { probed, stable_system_detected };

struct Stage3Result {
  Eigen::MatrixXd B_tau_hat;              // k_hat x m
  std::vector<int> omegas;                // wait counts per input column
  std::vector<int> probe_times;           // t_i
  std::vector<double> probe_state_norms;  // |x_{t_i}|
  std::vector<ColumnStatus> status;
};

// Column-by-column probe of the input-to-subspace map: wait until both
// stopping predicates hold (or omega_max is hit), inject u = alpha*|x|*e_i,
// coast tau-1 steps, and difference against the predicted free motion.
// first_column_wait_offset counts wait steps the caller already advanced
// toward omega_1.
Stage3Result stage3_estimate_Btau(TrajectoryCursor& cursor,
                                  const Eigen::MatrixXd& P1_hat,
                                  const Eigen::MatrixXd& M1_hat,
                                  const Config& cfg, double noise_C,
                                  double alpha,
                                  int first_column_wait_offset = 0);

struct Stage4Result {
  Eigen::MatrixXd K1_hat;        // m x k_hat
  double closed_loop_rho = 0.0;  // rho(M1_hat^tau + B_tau_hat K1_hat)
  Eigen::MatrixXd lyapunov_H;    // certificate for the closed loop
  double weighted_norm_U = 0.0;  // |closed loop| in the H-weighted norm
};

Stage4Result stage4_synthesize(const Eigen::MatrixXd& M1_hat,
                               const Eigen::MatrixXd& B_tau_hat, int tau,
                               double lqr_q, double lqr_r);

enum class RunStatus { complete, overflow, stage_error };

const char* run_status_name(RunStatus s);

struct RunResult {
  plant::TrajectoryLog log;
  std::optional<Stage1Result> stage1;
  std::optional<Stage2Result> stage2;
  std::optional<Stage3Result> stage3;
  std::optional<Stage4Result> stage4;
  RunStatus status = RunStatus::complete;
  std::string error;

  // Time index of the first feedback-controlled step (end of learning).
  int learning_steps = 0;
  double resolved_alpha = 0.0;
  double resolved_delta = 0.0;
  int resolved_omega_max = 0;
  int resolved_post_horizon = 0;
};

// Runs all four stages on one trajectory, then closes the loop with the
// learned tau-hop controller for the post horizon.
RunResult run_lts0n(const plant::LtiPlant& plant, const Config& cfg);

// Closed-loop matrix of the tau-hop system in the coordinates of the true
// orthogonal split; diagnostic, requires ground truth.
struct LhatBlocks {
  Eigen::MatrixXd L;
  Eigen::MatrixXd L11, L12, L21, L22;
  double rho = 0.0;
  double offdiag_norm_product = 0.0;  // |L12| * |L21|
};

LhatBlocks closed_loop_matrix_Lhat(const spectral::SpectralSplit& truth,
                                   const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& P1_hat,
                                   const Eigen::MatrixXd& K1_hat, int tau);

}  // namespace lts::lts0n
