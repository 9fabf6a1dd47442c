#include "lts/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "lts/rng.hpp"

namespace lts::harness {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int default_T(int n, int k) {
  return static_cast<int>(
      std::ceil(12.0 + 4.0 * k + 5.0 * std::log2(static_cast<double>(n))));
}

long steps_to_stabilize(const plant::TrajectoryLog& log, int learning_steps,
                        int window, double threshold) {
  if (window < 1)
    throw Error(errc::invalid_argument, "steps_to_stabilize: window >= 1");
  for (int t = std::max(learning_steps, window - 1); t < log.length(); ++t) {
    double sup = 0.0;
    for (int j = t - window + 1; j <= t; ++j)
      sup = std::max(sup, log.norms[j]);
    if (sup <= threshold) return t;
  }
  return -1;
}

namespace {

int settle_window(const SettleParams& settle, int tau) {
  return settle.window > 0 ? settle.window : std::max(5, 2 * tau);
}

double settle_threshold(const SettleParams& settle, double noise_bound) {
  return settle.threshold_factor * std::max(noise_bound, 1e-9);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty() || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

RunRecord record_run(const plant::LtiPlant& plant, const lts0n::Config& cfg,
                     double sigma, const SettleParams& settle) {
  RunRecord rec;
  rec.seed = cfg.seed;
  rec.n = plant.n();
  rec.m = plant.m();
  rec.k = plant.truth ? plant.truth->k : 0;
  rec.sigma = sigma;

  lts0n::RunResult run;
  try {
    run = lts0n::run_lts0n(plant, cfg);
  } catch (const Error&) {
    rec.status = "error";
    return rec;
  }
  rec.max_norm = run.log.max_norm();
  rec.learning_steps = run.learning_steps;

  if (run.status == lts0n::RunStatus::overflow) {
    rec.status = "blowup";
    return rec;
  }
  if (run.status != lts0n::RunStatus::complete) {
    rec.status = "error";
    return rec;
  }

  if (plant.truth && run.stage1 && run.stage4) {
    rec.proj_err = spectral::projector_distance(
        run.stage1->Pi1_hat,
        plant.truth->P1 * plant.truth->P1.transpose());
    rec.rho_lhat =
        lts0n::closed_loop_matrix_Lhat(*plant.truth, plant.B,
                                       run.stage1->P1_hat, run.stage4->K1_hat,
                                       cfg.tau)
            .rho;
  }

  rec.steps_to_stabilize = steps_to_stabilize(
      run.log, run.learning_steps, settle_window(settle, cfg.tau),
      settle_threshold(settle, plant.noise_bound()));
  rec.status = rec.steps_to_stabilize >= 0 ? "stabilized" : "not_settled";
  return rec;
}

plant::PlantGenConfig SweepConfig::plant_config(int n, double sigma) const {
  plant::PlantGenConfig pc;
  pc.n = n;
  pc.k = k;
  pc.m = m;
  pc.unstable_lo = unstable_lo;
  pc.unstable_hi = unstable_hi;
  pc.stable_lo = stable_lo;
  pc.stable_hi = stable_hi;
  pc.cond_limit = cond_limit;
  pc.noise = plant::NoiseModel::gaussian(sigma);
  return pc;
}

int sweep_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LTS_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<RunRecord> run_sweep(const SweepConfig& cfg) {
  if (cfg.n_list.empty() || cfg.sigma_list.empty() || cfg.seeds < 1)
    throw Error(errc::invalid_argument, "sweep: empty axes");

  struct Job {
    plant::LtiPlant const* plant;
    lts0n::Config learner;
    double sigma;
    std::uint64_t display_seed;
  };

  // Matrices are held fixed per dimension; only the noise stream varies with
  // sigma and seed, so curves across noise levels share plants.
  std::vector<plant::LtiPlant> plants;
  plants.reserve(cfg.n_list.size());
  for (int n : cfg.n_list) {
    auto rng = make_rng(mix_seed(cfg.plant_seed, static_cast<std::uint64_t>(n)));
    plants.push_back(plant::random_plant(cfg.plant_config(n, 0.0), rng));
  }

  std::vector<Job> jobs;
  for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    for (double sigma : cfg.sigma_list) {
      for (int seed = 1; seed <= cfg.seeds; ++seed) {
        Job job;
        job.plant = &plants[ni];
        job.sigma = sigma;
        job.learner = cfg.learner;
        job.learner.k_hat = cfg.k;
        job.learner.T = cfg.T > 0 ? cfg.T : default_T(cfg.n_list[ni], cfg.k);
        job.learner.seed =
            mix_seed(static_cast<std::uint64_t>(seed),
                     static_cast<std::uint64_t>(cfg.n_list[ni]),
                     seed_component(sigma));
        job.display_seed = static_cast<std::uint64_t>(seed);
        jobs.push_back(std::move(job));
      }
    }
  }

  std::vector<RunRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      const Job& job = jobs[idx];
      plant::LtiPlant noisy = *job.plant;
      noisy.noise = plant::NoiseModel::gaussian(job.sigma);
      records[idx] = record_run(noisy, job.learner, job.sigma, cfg.settle);
      records[idx].seed = job.display_seed;
    }
  };

  int threads = std::min<int>(sweep_thread_count(cfg.threads),
                              static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) {
              if (a.n != b.n) return a.n < b.n;
              if (a.sigma != b.sigma) return a.sigma < b.sigma;
              return a.seed < b.seed;
            });
  return records;
}

std::vector<SweepSummary> summarize(const std::vector<RunRecord>& records) {
  std::vector<SweepSummary> out;
  for (const auto& rec : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummary& s) {
      return s.n == rec.n && s.sigma == rec.sigma;
    });
    if (it == out.end()) {
      out.push_back(SweepSummary{rec.n, rec.sigma, 0, 0, 0.0, 0.0});
      it = out.end() - 1;
    }
    it->runs += 1;
    if (rec.status == "stabilized") it->stabilized += 1;
  }
  for (auto& s : out) {
    std::vector<double> steps;
    for (const auto& rec : records)
      if (rec.n == s.n && rec.sigma == s.sigma && rec.status == "stabilized")
        steps.push_back(static_cast<double>(rec.steps_to_stabilize));
    if (steps.empty()) {
      s.mean_steps = std::numeric_limits<double>::quiet_NaN();
      s.std_steps = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double mean = 0.0;
    for (double v : steps) mean += v;
    mean /= steps.size();
    double var = 0.0;
    for (double v : steps) var += (v - mean) * (v - mean);
    var = steps.size() > 1 ? var / (steps.size() - 1) : 0.0;
    s.mean_steps = mean;
    s.std_steps = std::sqrt(var);
  }
  std::sort(out.begin(), out.end(),
            [](const SweepSummary& a, const SweepSummary& b) {
              if (a.n != b.n) return a.n < b.n;
              return a.sigma < b.sigma;
            });
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<RunRecord>& records,
                     const std::vector<SweepSummary>& summaries) {
  out << "record,n,sigma,seed,k,m,steps_to_stabilize,learning_steps,max_norm,"
         "rho_lhat,proj_err,status,runs,stabilized,mean_steps,std_steps\n";
  for (const auto& r : records) {
    out << "run," << r.n << ',' << format_double(r.sigma) << ',' << r.seed
        << ',' << r.k << ',' << r.m << ',' << r.steps_to_stabilize << ','
        << r.learning_steps << ',' << format_double(r.max_norm) << ','
        << format_double(r.rho_lhat) << ',' << format_double(r.proj_err) << ','
        << r.status << ",,,,\n";
  }
  for (const auto& s : summaries) {
    out << "summary," << s.n << ',' << format_double(s.sigma)
        << ",,,,,,,,,," << s.runs << ',' << s.stabilized << ','
        << format_double(s.mean_steps) << ',' << format_double(s.std_steps)
        << "\n";
  }
}

ParsedSweepCsv parse_sweep_csv(std::istream& in) {
  ParsedSweepCsv out;
  std::string line;
  if (!std::getline(in, line))
    throw Error(errc::invalid_argument, "sweep csv: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    f.resize(16);
    if (f[0] == "run") {
      RunRecord r;
      r.n = std::stoi(f[1]);
      r.sigma = parse_double(f[2]);
      r.seed = std::stoull(f[3]);
      r.k = std::stoi(f[4]);
      r.m = std::stoi(f[5]);
      r.steps_to_stabilize = std::stol(f[6]);
      r.learning_steps = std::stoi(f[7]);
      r.max_norm = parse_double(f[8]);
      r.rho_lhat = parse_double(f[9]);
      r.proj_err = parse_double(f[10]);
      r.status = f[11];
      out.records.push_back(std::move(r));
    } else if (f[0] == "summary") {
      SweepSummary s;
      s.n = std::stoi(f[1]);
      s.sigma = parse_double(f[2]);
      s.runs = std::stoi(f[12]);
      s.stabilized = std::stoi(f[13]);
      s.mean_steps = parse_double(f[14]);
      s.std_steps = parse_double(f[15]);
      out.summaries.push_back(s);
    } else {
      throw Error(errc::invalid_argument, "sweep csv: unknown record " + f[0]);
    }
  }
  return out;
}

RunRecord baseline_full_id(const plant::LtiPlant& plant, int horizon_cap,
                           std::uint64_t seed, const SettleParams& settle,
                           double guard) {
  const int n = plant.n(), m = plant.m();
  if (horizon_cap < n + m * n)
    throw Error(errc::invalid_argument,
                "baseline: horizon cap below n + m*n");

  RunRecord rec;
  rec.seed = seed;
  rec.n = n;
  rec.m = m;
  rec.k = plant.truth ? plant.truth->k : 0;
  rec.sigma = plant.noise.sigma;

  const int id_horizon = std::min(n + m + 8, horizon_cap);
  rec.learning_steps = id_horizon;

  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  plant::TrajectoryLog log;
  log.start(VectorXd::Zero(n), plant::Phase::stage1);
  MatrixXd Z(n + m, id_horizon);
  MatrixXd Xnext(n, id_horizon);

  VectorXd x = VectorXd::Zero(n);
  bool blew_up = false;
  for (int t = 0; t < id_horizon && !blew_up; ++t) {
    VectorXd u(m);
    for (int i = 0; i < m; ++i) u(i) = gauss(rng);
    Z.col(t).head(n) = x;
    Z.col(t).tail(m) = u;
    x = plant::step(plant, x, u, rng);
    Xnext.col(t) = x;
    log.append(x, u, plant::Phase::stage1);
    if (!(x.norm() <= guard)) blew_up = true;
  }
  if (blew_up) {
    rec.max_norm = log.max_norm();
    rec.status = "blowup";
    return rec;
  }

  Eigen::BDCSVD<MatrixXd> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(sv.size() - 1) < 1e-6 * sv(0)) {
    rec.max_norm = log.max_norm();
    rec.status = "ill_conditioned";
    return rec;
  }
  MatrixXd pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() *
                  svd.matrixU().transpose();
  MatrixXd Theta = Xnext * pinv;  // [A_hat B_hat]
  MatrixXd A_hat = Theta.leftCols(n);
  MatrixXd B_hat = Theta.rightCols(m);

  MatrixXd K;
  try {
    K = spectral::lqr_gain(A_hat, B_hat, MatrixXd::Identity(n, n),
                           MatrixXd::Identity(m, m));
  } catch (const Error&) {
    rec.max_norm = log.max_norm();
    rec.status = "unstabilizable";
    return rec;
  }

  for (int t = id_horizon; t < horizon_cap && !blew_up; ++t) {
    VectorXd u = K * x;
    x = plant::step(plant, x, u, rng);
    log.append(x, u, plant::Phase::closed_loop);
    if (!(x.norm() <= guard)) blew_up = true;
  }
  rec.max_norm = log.max_norm();
  if (blew_up) {
    rec.status = "blowup";
    return rec;
  }

  rec.steps_to_stabilize = steps_to_stabilize(
      log, id_horizon, settle_window(settle, 1),
      settle_threshold(settle, plant.noise_bound()));
  rec.status = rec.steps_to_stabilize >= 0 ? "stabilized" : "not_settled";
  return rec;
}

void write_trajectory_csv(std::ostream& out, const plant::TrajectoryLog& log) {
  out << "t,norm_x,phase,u_norm\n";
  for (int t = 0; t < log.length(); ++t) {
    double u_norm = (t < static_cast<int>(log.inputs.size()))
                        ? log.inputs[t].norm()
                        : 0.0;
    out << t << ',' << format_double(log.norms[t]) << ','
        << plant::phase_name(log.phase_marks[t]) << ','
        << format_double(u_norm) << "\n";
  }
}

nlohmann::json run_report_json(const plant::LtiPlant& plant,
                               const lts0n::Config& cfg,
                               const lts0n::RunResult& run,
                               const SettleParams& settle) {
  nlohmann::json j;
  j["status"] = lts0n::run_status_name(run.status);
  if (!run.error.empty()) j["error"] = run.error;
  j["n"] = plant.n();
  j["m"] = plant.m();
  j["k_hat"] = cfg.k_hat;
  j["T"] = cfg.T;
  j["tau"] = cfg.tau;
  j["alpha"] = run.resolved_alpha;
  j["gamma"] = cfg.gamma;
  j["epsilon"] = cfg.epsilon;
  j["delta"] = run.resolved_delta;
  j["omega_max"] = run.resolved_omega_max;
  j["post_horizon"] = run.resolved_post_horizon;
  j["seed"] = cfg.seed;
  j["learning_steps"] = run.learning_steps;
  j["max_norm"] = run.log.max_norm();

  if (run.stage1) {
    nlohmann::json sv = nlohmann::json::array();
    for (Eigen::Index i = 0; i < run.stage1->singular_values.size(); ++i)
      sv.push_back(run.stage1->singular_values(i));
    j["singular_values"] = std::move(sv);
  }
  if (run.stage3) {
    j["omegas"] = run.stage3->omegas;
    j["probe_times"] = run.stage3->probe_times;
    nlohmann::json st = nlohmann::json::array();
    for (auto s : run.stage3->status)
      st.push_back(s == lts0n::ColumnStatus::probed ? "probed"
                                                    : "stable-system-detected");
    j["probe_status"] = std::move(st);
  }
  if (run.stage4) {
    j["closed_loop_rho"] = run.stage4->closed_loop_rho;
    j["weighted_norm_U"] = run.stage4->weighted_norm_U;
  }
  if (run.status == lts0n::RunStatus::complete) {
    long settle_at = steps_to_stabilize(
        run.log, run.learning_steps,
        settle.window > 0 ? settle.window : std::max(5, 2 * cfg.tau),
        settle.threshold_factor * std::max(plant.noise_bound(), 1e-9));
    j["steps_to_stabilize"] = settle_at;
  }
  if (plant.truth && run.status == lts0n::RunStatus::complete) {
    certify::ConstantParams cp;
    cp.tau = cfg.tau;
    cp.m = plant.m();
    cp.alpha = run.resolved_alpha;
    cp.gamma = cfg.gamma;
    cp.epsilon = cfg.epsilon;
    j["cert"] = certify::to_json(
        certify::error_report(plant, run, cfg, cp));
  }
  return j;
}

}  // namespace lts::harness
