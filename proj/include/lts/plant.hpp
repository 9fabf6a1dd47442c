#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lts/errors.hpp"
#include "lts/spectral.hpp"

#include "json.hpp"

namespace lts::plant {

// Additive process noise. effective_bound(n) is the magnitude threshold the
// learner plugs into its stopping rules; for the unbounded Gaussian model it
// is the 3-sigma surrogate 3*sigma*sqrt(n).
struct NoiseModel {
  enum class Kind { none, bounded_uniform, gaussian, truncated_gaussian };

  Kind kind = Kind::none;
  double sigma = 0.0;
  double c = 0.0;

  double effective_bound(int n) const;

  static NoiseModel none() { return {}; }
  static NoiseModel bounded_uniform(double c);
  static NoiseModel gaussian(double sigma);
  static NoiseModel truncated_gaussian(double sigma, double c);
};

Eigen::VectorXd sample_noise(const NoiseModel& model, int n,
                             std::mt19937_64& rng);

struct LtiPlant {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  NoiseModel noise;
  std::optional<spectral::SpectralSplit> truth;
  std::uint64_t seed = 0;  // generation metadata

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  double noise_bound() const { return noise.effective_bound(n()); }
};

enum class Phase { stage1, stage3_wait, stage3_probe, closed_loop };

const char* phase_name(Phase p);

struct TrajectoryLog {
  std::vector<Eigen::VectorXd> states;  // x_0 .. x_H
  std::vector<Eigen::VectorXd> inputs;  // u_0 .. u_{H-1}
  std::vector<double> norms;            // |x_t|
  std::vector<Phase> phase_marks;       // one label per state

  int length() const { return static_cast<int>(states.size()); }
  void start(Eigen::VectorXd x0, Phase phase);
  void append(Eigen::VectorXd x, Eigen::VectorXd u, Phase phase);
  double max_norm() const;
};

// Guard trip during simulation; carries whatever was simulated, including the
// offending state.
class OverflowError : public Error {
 public:
  OverflowError(TrajectoryLog partial, int step_index)
      : Error(errc::overflow,
              "state norm exceeded guard at step " + std::to_string(step_index)),
        log_(std::move(partial)),
        step_(step_index) {}

  const TrajectoryLog& partial() const noexcept { return log_; }
  int step_index() const noexcept { return step_; }

 private:
  TrajectoryLog log_;
  int step_;
};

constexpr double kDefaultGuard = 1e12;

Eigen::VectorXd step(const LtiPlant& plant, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, std::mt19937_64& rng);

TrajectoryLog simulate_open_loop(const LtiPlant& plant,
                                 const Eigen::VectorXd& x0, int steps,
                                 std::mt19937_64& rng,
                                 double guard = kDefaultGuard);

// Feedback u = K1 * P1_hat^T * x applied at t = 0, tau, 2*tau, ...; zero input
// otherwise.
TrajectoryLog run_tau_hop_closed_loop(const LtiPlant& plant,
                                      const Eigen::VectorXd& x0,
                                      const Eigen::MatrixXd& K1,
                                      const Eigen::MatrixXd& P1_hat, int tau,
                                      int horizon, std::mt19937_64& rng,
                                      double guard = kDefaultGuard);

struct PlantGenConfig {
  int n = 8;
  int k = 2;
  int m = 2;
  double unstable_lo = 1.15;
  double unstable_hi = 1.35;
  double stable_lo = 0.1;
  double stable_hi = 0.7;
  double cond_limit = 2000.0;
  NoiseModel noise = NoiseModel::gaussian(0.01);
  int max_attempts = 64;
};

// A = V diag(lambda) V^{-1} with n distinct real eigenvalues, k of them with
// modulus above 1, pairwise modulus gaps >= 1e-3, and the product of the
// extreme unstable/stable moduli below 1. B has unit-variance entries.
LtiPlant random_plant(const PlantGenConfig& cfg, std::mt19937_64& rng);

nlohmann::json to_json(const LtiPlant& plant);
LtiPlant plant_from_json(const nlohmann::json& j);
void save_plant(const LtiPlant& plant, const std::string& path);
LtiPlant load_plant(const std::string& path);

}  // namespace lts::plant
