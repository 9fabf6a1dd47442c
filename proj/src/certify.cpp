#include "lts/certify.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace lts::certify {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

double gap_constant(const VectorXcd& unstable_eigenvalues) {
  const Eigen::Index k = unstable_eigenvalues.size();
  if (k < 1)
    throw Error(errc::invalid_argument, "gap: need at least one eigenvalue");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(unstable_eigenvalues(i)) < 1e-300)
      throw Error(errc::degenerate_eigenvalues, "gap: zero eigenvalue");
    for (Eigen::Index j = i + 1; j < k; ++j)
      if (std::abs(unstable_eigenvalues(i) - unstable_eigenvalues(j)) < 1e-12)
        throw Error(errc::degenerate_eigenvalues,
                    "gap: coincident eigenvalues");
  }
  std::complex<double> prod = 1.0;
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      if (a != b)
        prod *= (1.0 / unstable_eigenvalues(a) - 1.0 / unstable_eigenvalues(b));
  return std::abs(prod);
}

double gaussian_density_sup_bound(double lambda_modulus) {
  if (!(lambda_modulus > 1.0))
    throw Error(errc::invalid_spectrum,
                "density sup bound needs modulus > 1");
  const double l2 = lambda_modulus * lambda_modulus;
  return std::sqrt(2.0 / M_PI) * std::sqrt((l2 - 1.0) / l2);
}

TheoryConstants compute_constants(const plant::LtiPlant& plant,
                                  const ConstantParams& p) {
  if (!plant.truth)
    throw Error(errc::invalid_argument,
                "compute_constants: plant carries no ground truth");
  const spectral::SpectralSplit& s = *plant.truth;
  if (!(p.theta > 0.0) || !(p.eps1 > 0.0) || !(p.eps2 > 0.0) ||
      !(p.eps4 > 0.0) || !(p.alpha > 0.0) || p.m < 1 || p.tau < 1)
    throw Error(errc::invalid_argument, "compute_constants: bad parameters");

  TheoryConstants out;
  out.theta = p.theta;
  out.C = plant.noise_bound();
  out.xi = s.xi;
  out.gelfand_horizon = p.gelfand_horizon;
  out.gap = gap_constant(s.eigenvalues.head(s.k));

  out.zeta_A =
      spectral::gelfand_constant(plant.A, p.eps1, p.gelfand_horizon).zeta;
  out.zeta_M1 =
      spectral::gelfand_constant(s.M1, p.eps1, p.gelfand_horizon).zeta;
  out.zeta_M2 =
      spectral::gelfand_constant(s.M2, p.eps2, p.gelfand_horizon).zeta;
  out.zeta_N2 =
      spectral::gelfand_constant(s.N2, p.eps4, p.gelfand_horizon).zeta;
  out.zeta_bar = std::max({out.zeta_A, out.zeta_M2, out.zeta_N2});

  const double norm_A = spectral::spectral_norm(plant.A);
  const double norm_B = spectral::spectral_norm(plant.B);
  const double l1 = std::abs(s.eigenvalues(0));
  const double lk1 = std::abs(s.eigenvalues(s.k));

  const double cross_gap = l1 + p.eps1 - lk1 - p.eps2;
  out.C_Delta = (cross_gap > 0.0 && s.xi < 1.0)
                    ? out.zeta_M1 * out.zeta_M2 *
                          ((2.0 - s.xi) * std::sqrt(2.0 * s.xi) * norm_A /
                           (1.0 - s.xi)) *
                          (2.0 * lk1 / cross_gap)
                    : std::numeric_limits<double>::infinity();

  const double gamma_prime = p.gamma - p.epsilon;
  const double stable_slack = 1.0 - (lk1 + p.eps4);
  out.C_gamma = (gamma_prime > 0.0 && stable_slack > 0.0 && s.xi < 1.0)
                    ? out.zeta_N2 * out.C /
                          (gamma_prime * (1.0 - s.xi) * stable_slack)
                    : std::numeric_limits<double>::infinity();

  out.C_B = (out.zeta_A * out.zeta_A *
                 (3.0 * p.tau * norm_A + norm_B + p.tau * out.C + 1.0) +
             (p.tau + 1.0) * out.C_Delta) *
            std::sqrt(static_cast<double>(p.m)) / p.alpha;

  out.Cz_gaussian.reserve(s.k);
  for (int i = 0; i < s.k; ++i)
    out.Cz_gaussian.push_back(
        gaussian_density_sup_bound(std::abs(s.eigenvalues(i))));
  return out;
}

long theory_T_bound(int n, int k, double eps, double gap, double theta,
                    double C, double lambda_k_mod, double lambda_k1_mod) {
  if (k < 1 || n <= k)
    throw Error(errc::invalid_spectrum, "T bound: need n > k >= 1");
  if (!(lambda_k_mod > 1.0) || !(lambda_k1_mod > 0.0) ||
      !(lambda_k1_mod < 1.0))
    throw Error(errc::invalid_spectrum,
                "T bound: need |lambda_k| > 1 > |lambda_{k+1}| > 0");
  if (!(eps > 0.0) || !(gap > 0.0) || !(theta > 0.0) || !(C > 0.0))
    throw Error(errc::invalid_argument,
                "T bound: eps, gap, theta, C must be positive");

  const double log_lk = std::log(lambda_k_mod);
  const double base = 4.0 * std::sqrt(2.0) *
                      std::pow(static_cast<double>(k), (k + 7.0) / 2.0) *
                      (n - k) * (C / (1.0 - lambda_k1_mod)) /
                      (std::sqrt(M_PI) * theta * gap);
  const double t1 = 2.0 * std::log(2.0 * base) / log_lk;
  const double t2 = 2.0 * std::log(base / eps) / log_lk;
  const double t3 = log_lk;
  return static_cast<long>(std::ceil(std::max({t1, t2, t3, 1.0})));
}

double d1_gram_lower_bound(int k, double lambda1_mod, double lambdak_mod,
                           int T, double theta, double gap) {
  if (k < 1 || T < 1 || !(lambda1_mod > 1.0) || !(lambdak_mod > 1.0) ||
      !(theta > 0.0) || !(gap > 0.0))
    throw Error(errc::invalid_argument, "d1 bound: bad parameters");
  const double l1sq = lambda1_mod * lambda1_mod;
  return (M_PI * std::pow(lambdak_mod, 2.0 * T) * theta * theta / 4.0) *
         (gap * gap / std::pow(static_cast<double>(k), k + 6.0)) *
         (l1sq / (l1sq - 1.0));
}

DavisKahanCheck davis_kahan_check(const spectral::SpectralSplit& truth,
                                  const MatrixXd& D) {
  const int k = truth.k;
  if (D.rows() != truth.n() || D.cols() < k)
    throw Error(errc::dimension_mismatch, "davis_kahan_check: bad data matrix");

  MatrixXd D1 = truth.R1 * D;
  MatrixXd D2 = truth.R2 * D;

  Eigen::BDCSVD<MatrixXd> svd_d1(D1);
  Eigen::BDCSVD<MatrixXd> svd_d(D);
  DavisKahanCheck out;
  out.sigma_hat_k = svd_d1.singularValues()(k - 1);
  const auto& sv = svd_d.singularValues();
  out.sigma_k1 = (k < sv.size()) ? sv(k) : 0.0;
  if (!(out.sigma_hat_k > out.sigma_k1))
    throw Error(errc::gap_violated,
                "davis_kahan_check: singular-value gap is not positive");

  auto s1 = lts0n::stage1_estimate_subspace(D, k);
  MatrixXd Pi1 = truth.P1 * truth.P1.transpose();
  out.lhs = spectral::projector_distance(s1.Pi1_hat, Pi1);
  out.rhs = std::sqrt(2.0 * k) * spectral::spectral_norm(D2) /
            (out.sigma_hat_k - out.sigma_k1);
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

bool ultimate_boundedness_check(const plant::TrajectoryLog& log, int window,
                                double threshold) {
  if (window < 1 || window > log.length())
    throw Error(errc::invalid_argument,
                "boundedness check: window must be in [1, log length]");
  double sup = 0.0;
  for (int t = log.length() - window; t < log.length(); ++t)
    sup = std::max(sup, log.norms[t]);
  return sup <= threshold;
}

CertReport error_report(const plant::LtiPlant& plant,
                        const lts0n::RunResult& run, const lts0n::Config& cfg,
                        const ConstantParams& params, int bounded_window,
                        double bounded_threshold) {
  if (!plant.truth)
    throw Error(errc::invalid_argument, "error_report: plant has no truth");
  if (!run.stage1 || !run.stage2 || !run.stage3 || !run.stage4)
    throw Error(errc::invalid_argument, "error_report: run is incomplete");
  const spectral::SpectralSplit& s = *plant.truth;

  CertReport r;
  r.gelfand_horizon = params.gelfand_horizon;

  MatrixXd Pi1 = s.P1 * s.P1.transpose();
  r.proj_err = spectral::projector_distance(run.stage1->Pi1_hat, Pi1);

  // All bounds are stated relative to a truth basis rotated onto the
  // estimate; the rotation also conjugates the truth blocks being compared.
  auto align = spectral::basis_align(s.P1, run.stage1->P1_hat);
  r.delta_meas = align.delta;
  const MatrixXd& W = align.W;

  const double l1 = std::abs(s.eigenvalues(0));
  const double norm_A = spectral::spectral_norm(plant.A);
  r.zeta_A =
      spectral::gelfand_constant(plant.A, params.eps1, params.gelfand_horizon)
          .zeta;
  const double growth = std::pow(l1 + params.eps1, params.tau - 1.0);

  r.m1_err = spectral::spectral_norm(run.stage2->M1_hat -
                                     W.transpose() * s.M1 * W);
  r.m1_bound = 3.0 * norm_A * r.delta_meas;
  r.m1_ok = r.m1_err <= r.m1_bound + 1e-12;

  MatrixXd M1_tau_hat = spectral::matrix_power(run.stage2->M1_hat, cfg.tau);
  MatrixXd M1_tau = spectral::matrix_power(s.M1, cfg.tau);
  r.m1tau_err =
      spectral::spectral_norm(M1_tau_hat - W.transpose() * M1_tau * W);
  r.m1tau_bound =
      3.0 * cfg.tau * norm_A * r.zeta_A * r.zeta_A * growth * r.delta_meas;
  r.m1tau_ok = r.m1tau_err <= r.m1tau_bound + 1e-12;

  ConstantParams cp = params;
  cp.tau = cfg.tau;
  cp.m = plant.m();
  cp.alpha = run.resolved_alpha;
  TheoryConstants tc = compute_constants(plant, cp);
  MatrixXd B_tau =
      s.P1.transpose() * spectral::matrix_power(plant.A, cfg.tau - 1) * plant.B;
  r.btau_err = spectral::spectral_norm(run.stage3->B_tau_hat -
                                       W.transpose() * B_tau);
  r.btau_bound = tc.C_B * growth * r.delta_meas;
  r.btau_ok = r.btau_err <= r.btau_bound + 1e-12;

  try {
    auto dk = davis_kahan_check(s, run.stage1->D);
    r.dk_lhs = dk.lhs;
    r.dk_rhs = dk.rhs;
    r.dk_holds = dk.holds;
    r.dk_applicable = true;
  } catch (const Error& e) {
    if (e.code() != errc::gap_violated) throw;
    r.dk_applicable = false;
  }

  r.rho_lhat = lts0n::closed_loop_matrix_Lhat(s, plant.B, run.stage1->P1_hat,
                                              run.stage4->K1_hat, cfg.tau)
                   .rho;

  const double C = plant.noise_bound();
  const double delta = run.resolved_delta;
  for (std::size_t i = 0; i < run.stage3->probe_state_norms.size(); ++i) {
    double nx = run.stage3->probe_state_norms[i];
    if (!(C / nx < delta))
      r.premise_violations.push_back(static_cast<int>(i));
  }
  r.probe_premise_ok = r.premise_violations.empty();

  int window = bounded_window > 0 ? bounded_window : 5 * cfg.T;
  window = std::min(window, run.log.length());
  double threshold = bounded_threshold > 0.0
                         ? bounded_threshold
                         : 10.0 * std::max(C, 1e-9) * plant.n();
  r.bounded = ultimate_boundedness_check(run.log, window, threshold);
  return r;
}

nlohmann::json to_json(const CertReport& r) {
  nlohmann::json j;
  j["proj_err"] = r.proj_err;
  j["delta_meas"] = r.delta_meas;
  j["dk_lhs"] = r.dk_lhs;
  j["dk_rhs"] = r.dk_rhs;
  j["dk_holds"] = r.dk_holds;
  j["dk_applicable"] = r.dk_applicable;
  j["m1_err"] = r.m1_err;
  j["m1_bound"] = r.m1_bound;
  j["m1_ok"] = r.m1_ok;
  j["m1tau_err"] = r.m1tau_err;
  j["m1tau_bound"] = r.m1tau_bound;
  j["m1tau_ok"] = r.m1tau_ok;
  j["btau_err"] = r.btau_err;
  j["btau_bound"] = r.btau_bound;
  j["btau_ok"] = r.btau_ok;
  j["rho_lhat"] = r.rho_lhat;
  j["bounded"] = r.bounded;
  j["probe_premise_ok"] = r.probe_premise_ok;
  j["premise_violations"] = r.premise_violations;
  j["zeta_A"] = r.zeta_A;
  j["gelfand_horizon"] = r.gelfand_horizon;
  return j;
}

nlohmann::json to_json(const TheoryConstants& c) {
  nlohmann::json j;
  j["gap"] = c.gap;
  j["theta"] = c.theta;
  j["C"] = c.C;
  j["xi"] = c.xi;
  j["zeta_A"] = c.zeta_A;
  j["zeta_M1"] = c.zeta_M1;
  j["zeta_M2"] = c.zeta_M2;
  j["zeta_N2"] = c.zeta_N2;
  j["zeta_bar"] = c.zeta_bar;
  j["C_Delta"] = c.C_Delta;
  j["C_gamma"] = c.C_gamma;
  j["C_B"] = c.C_B;
  j["Cz_gaussian"] = c.Cz_gaussian;
  j["gelfand_horizon"] = c.gelfand_horizon;
  return j;
}

}  // namespace lts::certify
