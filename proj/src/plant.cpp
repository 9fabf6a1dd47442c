#include "lts/plant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "lts/rng.hpp"

namespace lts::plant {

using Eigen::MatrixXd;
using Eigen::VectorXd;

NoiseModel NoiseModel::bounded_uniform(double c) {
  if (c < 0.0) throw Error(errc::invalid_argument, "noise bound must be >= 0");
  NoiseModel m;
  m.kind = Kind::bounded_uniform;
  m.c = c;
  return m;
}

NoiseModel NoiseModel::gaussian(double sigma) {
  if (sigma < 0.0)
    throw Error(errc::invalid_argument, "noise sigma must be >= 0");
  NoiseModel m;
  m.kind = Kind::gaussian;
  m.sigma = sigma;
  return m;
}

NoiseModel NoiseModel::truncated_gaussian(double sigma, double c) {
  if (sigma < 0.0 || c <= 0.0)
    throw Error(errc::invalid_argument, "bad truncated gaussian parameters");
  NoiseModel m;
  m.kind = Kind::truncated_gaussian;
  m.sigma = sigma;
  m.c = c;
  return m;
}

double NoiseModel::effective_bound(int n) const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::bounded_uniform: return c;
    case Kind::gaussian: return 3.0 * sigma * std::sqrt(static_cast<double>(n));
    case Kind::truncated_gaussian: return c;
  }
  return 0.0;
}

Eigen::VectorXd sample_noise(const NoiseModel& model, int n,
                             std::mt19937_64& rng) {
  if (n < 1) throw Error(errc::dimension_mismatch, "noise dimension must be >= 1");
  switch (model.kind) {
    case NoiseModel::Kind::none:
      return VectorXd::Zero(n);
    case NoiseModel::Kind::gaussian: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      VectorXd eta(n);
      for (int i = 0; i < n; ++i) eta(i) = model.sigma * gauss(rng);
      return eta;
    }
    case NoiseModel::Kind::bounded_uniform: {
      // Uniform in the radius-c ball: gaussian direction, radius c*u^(1/n).
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      VectorXd dir(n);
      double norm = 0.0;
      do {
        for (int i = 0; i < n; ++i) dir(i) = gauss(rng);
        norm = dir.norm();
      } while (norm < 1e-300);
      double radius =
          model.c * std::pow(unif(rng), 1.0 / static_cast<double>(n));
      return dir * (radius / norm);
    }
    case NoiseModel::Kind::truncated_gaussian: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int attempt = 0; attempt < 100000; ++attempt) {
        VectorXd eta(n);
        for (int i = 0; i < n; ++i) eta(i) = model.sigma * gauss(rng);
        if (eta.norm() <= model.c) return eta;
      }
      throw Error(errc::invalid_argument,
                  "truncated gaussian: acceptance region too small");
    }
  }
  return VectorXd::Zero(n);
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::stage1: return "stage1";
    case Phase::stage3_wait: return "stage3-wait";
    case Phase::stage3_probe: return "stage3-probe";
    case Phase::closed_loop: return "closed-loop";
  }
  return "unknown";
}

void TrajectoryLog::start(Eigen::VectorXd x0, Phase phase) {
  states.clear();
  inputs.clear();
  norms.clear();
  phase_marks.clear();
  norms.push_back(x0.norm());
  states.push_back(std::move(x0));
  phase_marks.push_back(phase);
}

void TrajectoryLog::append(Eigen::VectorXd x, Eigen::VectorXd u, Phase phase) {
  norms.push_back(x.norm());
  states.push_back(std::move(x));
  inputs.push_back(std::move(u));
  phase_marks.push_back(phase);
}

double TrajectoryLog::max_norm() const {
  double m = 0.0;
  for (double v : norms) m = std::max(m, v);
  return m;
}

Eigen::VectorXd step(const LtiPlant& plant, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, std::mt19937_64& rng) {
  if (x.size() != plant.n() || u.size() != plant.m())
    throw Error(errc::dimension_mismatch, "step: state/input size mismatch");
  return plant.A * x + plant.B * u + sample_noise(plant.noise, plant.n(), rng);
}

TrajectoryLog simulate_open_loop(const LtiPlant& plant,
                                 const Eigen::VectorXd& x0, int steps,
                                 std::mt19937_64& rng, double guard) {
  if (steps < 1)
    throw Error(errc::invalid_argument, "simulate_open_loop: steps must be >= 1");
  TrajectoryLog log;
  log.start(x0, Phase::stage1);
  VectorXd x = x0;
  const VectorXd zero_u = VectorXd::Zero(plant.m());
  for (int t = 0; t < steps; ++t) {
    x = step(plant, x, zero_u, rng);
    log.append(x, zero_u, Phase::stage1);
    if (!(x.norm() <= guard)) throw OverflowError(std::move(log), t + 1);
  }
  return log;
}

TrajectoryLog run_tau_hop_closed_loop(const LtiPlant& plant,
                                      const Eigen::VectorXd& x0,
                                      const Eigen::MatrixXd& K1,
                                      const Eigen::MatrixXd& P1_hat, int tau,
                                      int horizon, std::mt19937_64& rng,
                                      double guard) {
  if (tau < 1)
    throw Error(errc::invalid_argument, "run_tau_hop_closed_loop: tau >= 1");
  if (horizon < 1)
    throw Error(errc::invalid_argument, "run_tau_hop_closed_loop: horizon >= 1");
  if (P1_hat.rows() != plant.n() || K1.cols() != P1_hat.cols() ||
      K1.rows() != plant.m())
    throw Error(errc::dimension_mismatch,
                "run_tau_hop_closed_loop: controller shape mismatch");

  TrajectoryLog log;
  log.start(x0, Phase::closed_loop);
  VectorXd x = x0;
  const VectorXd zero_u = VectorXd::Zero(plant.m());
  for (int t = 0; t < horizon; ++t) {
    VectorXd u = (t % tau == 0) ? VectorXd(K1 * (P1_hat.transpose() * x))
                                : zero_u;
    x = step(plant, x, u, rng);
    log.append(x, u, Phase::closed_loop);
    if (!(x.norm() <= guard)) throw OverflowError(std::move(log), t + 1);
  }
  return log;
}

LtiPlant random_plant(const PlantGenConfig& cfg, std::mt19937_64& rng) {
  if (cfg.k < 1 || cfg.k >= cfg.n || cfg.m < 1)
    throw Error(errc::generation_failed,
                "random_plant: need 1 <= k < n and m >= 1");
  if (!(cfg.unstable_lo > 1.0) || !(cfg.unstable_hi >= cfg.unstable_lo))
    throw Error(errc::generation_failed, "random_plant: bad unstable range");
  if (!(cfg.stable_lo > 0.0) || !(cfg.stable_hi >= cfg.stable_lo) ||
      !(cfg.stable_hi < 1.0))
    throw Error(errc::generation_failed, "random_plant: bad stable range");
  if (!(cfg.unstable_hi * cfg.stable_hi < 1.0))
    throw Error(errc::generation_failed,
                "random_plant: range extremes violate |l_1||l_{k+1}| < 1");

  const int n = cfg.n, k = cfg.k;
  constexpr double kMinGap = 1e-3;
  // Stratified draws: one modulus per equal-width bin, each shrunk by half a
  // gap at both ends, so pairwise separations hold by construction even when
  // many stable moduli share a narrow range.
  auto stratified = [&](double lo, double hi, int count,
                        std::vector<double>& out) {
    const double width = (hi - lo) / count;
    if (count > 1 && width < kMinGap)
      throw Error(errc::generation_failed,
                  "random_plant: range too narrow for the modulus gap");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
      double a = lo + i * width, b = lo + (i + 1) * width;
      if (count > 1) {
        a += kMinGap / 2;
        b -= kMinGap / 2;
      }
      out.push_back(a + (b - a) * unif(rng));
    }
  };
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::vector<double> lam;
    lam.reserve(n);
    stratified(cfg.unstable_lo, cfg.unstable_hi, k, lam);
    stratified(cfg.stable_lo, cfg.stable_hi, n - k, lam);
    std::sort(lam.begin(), lam.begin() + k, std::greater<>());
    std::sort(lam.begin() + k, lam.end(), std::greater<>());
    bool gaps_ok = true;
    for (int i = 0; i + 1 < n && gaps_ok; ++i)
      gaps_ok = (lam[i] - lam[i + 1] >= kMinGap * 0.999);
    if (!gaps_ok) continue;

    MatrixXd V(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) V(i, j) = gauss(rng);
    Eigen::BDCSVD<MatrixXd> svd(V);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= 0.0 || sv(0) / sv(n - 1) > cfg.cond_limit) continue;

    MatrixXd VL = V;
    for (int j = 0; j < n; ++j) VL.col(j) *= lam[j];
    // A = V diag(lam) V^{-1}, formed by solving V^T A^T = (V diag)^T.
    MatrixXd A =
        V.transpose().partialPivLu().solve(VL.transpose()).transpose();

    MatrixXd B(n, cfg.m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cfg.m; ++j) B(i, j) = gauss(rng);

    LtiPlant plant;
    plant.A = std::move(A);
    plant.B = std::move(B);
    plant.noise = cfg.noise;
    try {
      plant.truth = spectral::invariant_split(plant.A, k);
    } catch (const Error&) {
      continue;
    }
    return plant;
  }
  throw Error(errc::generation_failed,
              "random_plant: rejection sampling exhausted");
}

namespace {

nlohmann::json matrix_to_json(const MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.empty())
    throw Error(errc::invalid_argument,
                std::string("plant json: ") + name + " must be a 2-d array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(errc::invalid_argument,
                  std::string("plant json: ragged rows in ") + name);
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row.at(c).get<double>();
  }
  return M;
}

nlohmann::json noise_to_json(const NoiseModel& m) {
  switch (m.kind) {
    case NoiseModel::Kind::none:
      return {{"kind", "none"}};
    case NoiseModel::Kind::bounded_uniform:
      return {{"kind", "bounded_uniform"}, {"c", m.c}};
    case NoiseModel::Kind::gaussian:
      return {{"kind", "gaussian"}, {"sigma", m.sigma}};
    case NoiseModel::Kind::truncated_gaussian:
      return {{"kind", "truncated_gaussian"}, {"sigma", m.sigma}, {"c", m.c}};
  }
  return {{"kind", "none"}};
}

NoiseModel noise_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") return NoiseModel::none();
  if (kind == "bounded_uniform")
    return NoiseModel::bounded_uniform(j.at("c").get<double>());
  if (kind == "gaussian")
    return NoiseModel::gaussian(j.at("sigma").get<double>());
  if (kind == "truncated_gaussian")
    return NoiseModel::truncated_gaussian(j.at("sigma").get<double>(),
                                          j.at("c").get<double>());
  throw Error(errc::invalid_argument, "plant json: unknown noise kind " + kind);
}

}  // namespace

nlohmann::json to_json(const LtiPlant& plant) {
  nlohmann::json j;
  j["n"] = plant.n();
  j["m"] = plant.m();
  j["k"] = plant.truth ? plant.truth->k : 0;
  j["A"] = matrix_to_json(plant.A);
  j["B"] = matrix_to_json(plant.B);
  j["noise"] = noise_to_json(plant.noise);
  j["seed"] = plant.seed;
  return j;
}

LtiPlant plant_from_json(const nlohmann::json& j) {
  LtiPlant plant;
  plant.A = matrix_from_json(j.at("A"), "A");
  plant.B = matrix_from_json(j.at("B"), "B");
  if (plant.A.rows() != plant.A.cols())
    throw Error(errc::invalid_argument, "plant json: A must be square");
  if (plant.B.rows() != plant.A.rows())
    throw Error(errc::invalid_argument, "plant json: B row count mismatch");
  if (j.contains("n") &&
      j.at("n").get<int>() != static_cast<int>(plant.A.rows()))
    throw Error(errc::invalid_argument, "plant json: n mismatch");
  if (j.contains("m") &&
      j.at("m").get<int>() != static_cast<int>(plant.B.cols()))
    throw Error(errc::invalid_argument, "plant json: m mismatch");
  plant.noise = noise_from_json(j.at("noise"));
  if (j.contains("seed")) plant.seed = j.at("seed").get<std::uint64_t>();

  const int k = j.contains("k") ? j.at("k").get<int>() : 0;
  if (k >= 1 && k <= plant.n() - 1) {
    try {
      plant.truth = spectral::invariant_split(plant.A, k);
    } catch (const Error&) {
      plant.truth.reset();  // hand-made A may not admit the split
    }
  }
  return plant;
}

void save_plant(const LtiPlant& plant, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw Error(errc::invalid_argument, "cannot open for writing: " + path);
  out << to_json(plant).dump(2) << "\n";
}

LtiPlant load_plant(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(errc::invalid_argument, "cannot open plant file: " + path);
  nlohmann::json j;
  in >> j;
  return plant_from_json(j);
}

}  // namespace lts::plant
