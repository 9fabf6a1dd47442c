#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lts/certify.hpp"
#include "lts/lts0n.hpp"
#include "lts/plant.hpp"

#include "json.hpp"

namespace lts::harness {

// Horizon schedule used when no explicit T is given: grows with the number of
// expanding modes and logarithmically with the state dimension.
int default_T(int n, int k);

// First time index t >= learning_steps whose trailing window of |x| sups
// falls at or below the threshold; -1 when it never does.
long steps_to_stabilize(const plant::TrajectoryLog& log, int learning_steps,
                        int window, double threshold);

struct RunRecord {
  std::uint64_t seed = 0;
  int n = 0, k = 0, m = 0;
  double sigma = 0.0;
  long steps_to_stabilize = -1;
  int learning_steps = 0;
  double max_norm = 0.0;
  double rho_lhat = std::numeric_limits<double>::quiet_NaN();
  double proj_err = std::numeric_limits<double>::quiet_NaN();
  std::string status;  // stabilized|not_settled|blowup|ill_conditioned|...
};

struct SettleParams {
  int window = 0;              // 0 = max(5, 2*tau)
  double threshold_factor = 10.0;  // threshold = factor * noise bound
};

// One learner run distilled into a record row.
RunRecord record_run(const plant::LtiPlant& plant, const lts0n::Config& cfg,
                     double sigma, const SettleParams& settle);

struct SweepConfig {
  std::vector<int> n_list{8, 16, 32};
  std::vector<double> sigma_list{0.01};
  int seeds = 20;
  int k = 2;
  int m = 2;
  lts0n::Config learner;       // T == 0 means the default_T schedule
  int T = 0;
  std::uint64_t plant_seed = 12345;
  double unstable_lo = 1.15, unstable_hi = 1.35;
  double stable_lo = 0.1, stable_hi = 0.7;
  double cond_limit = 2000.0;
  SettleParams settle;
  bool with_baseline = false;
  int threads = 0;  // 0 = LTS_THREADS env or hardware

  plant::PlantGenConfig plant_config(int n, double sigma) const;
};

// One record per (n, sigma, seed), rows sorted, plants fixed per dimension so
// that noise-level curves share matrices. Runs execute in parallel.
std::vector<RunRecord> run_sweep(const SweepConfig& cfg);

struct SweepSummary {
  int n = 0;
  double sigma = 0.0;
  int runs = 0;
  int stabilized = 0;
  double mean_steps = std::numeric_limits<double>::quiet_NaN();
  double std_steps = std::numeric_limits<double>::quiet_NaN();
};

std::vector<SweepSummary> summarize(const std::vector<RunRecord>& records);

void write_sweep_csv(std::ostream& out, const std::vector<RunRecord>& records,
                     const std::vector<SweepSummary>& summaries);

struct ParsedSweepCsv {
  std::vector<RunRecord> records;
  std::vector<SweepSummary> summaries;
};

ParsedSweepCsv parse_sweep_csv(std::istream& in);

// Naive strategy: excite in open loop long enough to regress the full
// dynamics, fit (A, B) by least squares, close the loop with a full-state
// LQR. Exists to quantify the cost of exploring all of R^n before acting.
RunRecord baseline_full_id(const plant::LtiPlant& plant, int horizon_cap,
                           std::uint64_t seed, const SettleParams& settle,
                           double guard = plant::kDefaultGuard);

void write_trajectory_csv(std::ostream& out, const plant::TrajectoryLog& log);

nlohmann::json run_report_json(const plant::LtiPlant& plant,
                               const lts0n::Config& cfg,
                               const lts0n::RunResult& run,
                               const SettleParams& settle);

int sweep_thread_count(int requested);

}  // namespace lts::harness
