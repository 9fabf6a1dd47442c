#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lts/lts0n.hpp"
#include "lts/plant.hpp"
#include "lts/spectral.hpp"

#include "json.hpp"

namespace lts::certify {

// Knobs of the constant calculators: failure-probability parameter theta and
// the epsilons at which the finite-horizon growth constants are measured.
struct ConstantParams {
  double theta = 0.05;
  double eps1 = 0.1;  // for A and M1
  double eps2 = 0.1;  // for M2
  double eps4 = 0.1;  // for N2
  double gamma = 0.15;
  double epsilon = 0.1;
  int tau = 3;
  double alpha = 0.1;
  int m = 1;
  int gelfand_horizon = 256;
};

struct TheoryConstants {
  double gap = 0.0;
  double theta = 0.0;
  double C = 0.0;
  double xi = 0.0;
  double zeta_A = 1.0;
  double zeta_M1 = 1.0;
  double zeta_M2 = 1.0;
  double zeta_N2 = 1.0;
  double zeta_bar = 1.0;
  double C_Delta = 0.0;
  double C_gamma = 0.0;
  double C_B = 0.0;
  std::vector<double> Cz_gaussian;  // one per expanding mode
  int gelfand_horizon = 0;
};

// Product of pairwise differences of inverted expanding eigenvalues, over
// ordered pairs; 1 for a single eigenvalue.
double gap_constant(const Eigen::VectorXcd& unstable_eigenvalues);

// Density-sup bound sqrt(2/pi) * sqrt((|l|^2-1)/|l|^2) for the accumulated
// whitened noise of a mode with modulus |l| > 1 under unit Gaussian noise.
double gaussian_density_sup_bound(double lambda_modulus);

TheoryConstants compute_constants(const plant::LtiPlant& plant,
                                  const ConstantParams& params);

// Smallest horizon for which the projector-error guarantee holds at budget
// eps; ceiling of the max of the three analytic conditions.
long theory_T_bound(int n, int k, double eps, double gap, double theta,
                    double C, double lambda_k_mod, double lambda_k1_mod);

// High-probability lower bound on the smallest eigenvalue of D1 D1^T after T
// open-loop steps; formula-level calculator.
double d1_gram_lower_bound(int k, double lambda1_mod, double lambdak_mod,
                           int T, double theta, double gap);

struct DavisKahanCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double sigma_hat_k = 0.0;  // k-th singular value of the expanding part
  double sigma_k1 = 0.0;     // (k+1)-th singular value of the data matrix
};

// Projector perturbation against the sqrt(2k) |D2| / (sigma_hat_k -
// sigma_{k+1}) certificate, with D split along the invariant decomposition.
DavisKahanCheck davis_kahan_check(const spectral::SpectralSplit& truth,
                                  const Eigen::MatrixXd& D);

struct CertReport {
  double proj_err = 0.0;
  double delta_meas = 0.0;
  double dk_lhs = 0.0;
  double dk_rhs = 0.0;
  bool dk_holds = false;
  bool dk_applicable = false;
  double m1_err = 0.0;
  double m1_bound = 0.0;
  bool m1_ok = false;
  double m1tau_err = 0.0;
  double m1tau_bound = 0.0;
  bool m1tau_ok = false;
  double btau_err = 0.0;
  double btau_bound = 0.0;
  bool btau_ok = false;
  double rho_lhat = 0.0;
  bool bounded = false;
  bool probe_premise_ok = true;          // C/|x_{t_i}| < delta at every probe
  std::vector<int> premise_violations;   // offending input columns (0-based)
  double zeta_A = 1.0;
  int gelfand_horizon = 0;
};

// Measured estimation errors of a completed run against their bounds, each
// bound evaluated at the measured basis distance and measured growth
// constants. bounded_window/threshold <= 0 resolve to 5*T and 10*C*n.
CertReport error_report(const plant::LtiPlant& plant,
                        const lts0n::RunResult& run, const lts0n::Config& cfg,
                        const ConstantParams& params, int bounded_window = 0,
                        double bounded_threshold = 0.0);

// Sup of |x_t| over the trailing window, compared against the threshold.
bool ultimate_boundedness_check(const plant::TrajectoryLog& log, int window,
                                double threshold);

nlohmann::json to_json(const CertReport& r);
nlohmann::json to_json(const TheoryConstants& c);

}  // namespace lts::certify
