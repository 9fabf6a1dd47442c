// Command-line front end: plant generation, single runs, seed sweeps,
// the naive full-identification baseline, and bound certification.
//
// Exit codes: 0 success, 2 generation/domain error, 3 run failure, 64 usage.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lts/certify.hpp"
#include "lts/harness.hpp"
#include "lts/lts0n.hpp"
#include "lts/plant.hpp"
#include "lts/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 2;
constexpr int kExitRun = 3;
constexpr int kExitUsage = 64;

struct GenOptions {
  int n = 8, k = 2, m = 2;
  double sigma = 0.01;
  std::string noise_kind = "gaussian";
  double noise_c = 0.0;
  std::uint64_t seed = 1;
  std::string out;
  double unstable_lo = 1.15, unstable_hi = 1.35;
  double stable_lo = 0.1, stable_hi = 0.7;
  double cond_limit = 2000.0;
};

lts::plant::NoiseModel make_noise(const std::string& kind, double sigma,
                                  double c) {
  if (kind == "none") return lts::plant::NoiseModel::none();
  if (kind == "gaussian") return lts::plant::NoiseModel::gaussian(sigma);
  if (kind == "bounded_uniform")
    return lts::plant::NoiseModel::bounded_uniform(c);
  if (kind == "truncated_gaussian")
    return lts::plant::NoiseModel::truncated_gaussian(sigma, c);
  throw lts::Error(lts::errc::invalid_argument, "unknown noise kind " + kind);
}

struct RunOptions {
  std::string plant_path;
  lts::lts0n::Config cfg;
  int k_hat = 0;  // 0 = plant's k
  std::string csv_path;
  std::string report_path;
  lts::harness::SettleParams settle;
};

lts::lts0n::Config resolve_learner(const lts::plant::LtiPlant& plant,
                                   lts::lts0n::Config cfg, int k_hat_flag) {
  if (k_hat_flag > 0) {
    cfg.k_hat = k_hat_flag;
  } else if (plant.truth) {
    cfg.k_hat = plant.truth->k;
  }
  if (cfg.T == 0)
    cfg.T = lts::harness::default_T(plant.n(), std::max(cfg.k_hat, 1));
  return cfg;
}

int do_run(const RunOptions& opt) {
  lts::plant::LtiPlant plant = lts::plant::load_plant(opt.plant_path);
  lts::lts0n::Config cfg = resolve_learner(plant, opt.cfg, opt.k_hat);
  lts::lts0n::RunResult run = lts::lts0n::run_lts0n(plant, cfg);

  if (!opt.csv_path.empty()) {
    std::ofstream out(opt.csv_path);
    if (!out) {
      std::cerr << "cannot write " << opt.csv_path << "\n";
      return kExitDomain;
    }
    lts::harness::write_trajectory_csv(out, run.log);
  }
  if (!opt.report_path.empty()) {
    std::ofstream out(opt.report_path);
    if (!out) {
      std::cerr << "cannot write " << opt.report_path << "\n";
      return kExitDomain;
    }
    out << lts::harness::run_report_json(plant, cfg, run, opt.settle).dump(2)
        << "\n";
  } else {
    std::cout << lts::harness::run_report_json(plant, cfg, run, opt.settle)
                     .dump(2)
              << "\n";
  }
  if (run.status != lts::lts0n::RunStatus::complete) {
    std::cerr << "run failed: " << run.error << "\n";
    return kExitRun;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-trajectory stabilization of unknown linear systems"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  GenOptions gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "generate a random plant");
  cmd_gen->add_option("--n", gen.n, "state dimension")->required();
  cmd_gen->add_option("--k", gen.k, "number of expanding modes")->required();
  cmd_gen->add_option("--m", gen.m, "input dimension")->required();
  cmd_gen->add_option("--sigma", gen.sigma, "gaussian noise std-dev");
  cmd_gen->add_option("--noise", gen.noise_kind,
                      "none|gaussian|bounded_uniform|truncated_gaussian");
  cmd_gen->add_option("--noise-c", gen.noise_c, "bound for bounded models");
  cmd_gen->add_option("--seed", gen.seed, "generator seed");
  cmd_gen->add_option("--out", gen.out, "output JSON path")->required();
  cmd_gen->add_option("--unstable-lo", gen.unstable_lo, "");
  cmd_gen->add_option("--unstable-hi", gen.unstable_hi, "");
  cmd_gen->add_option("--stable-lo", gen.stable_lo, "");
  cmd_gen->add_option("--stable-hi", gen.stable_hi, "");
  cmd_gen->add_option("--cond-limit", gen.cond_limit, "");

  // --- run ---------------------------------------------------------------
  RunOptions run;
  CLI::App* cmd_run = app.add_subcommand("run", "run the learner on a plant");
  cmd_run->add_option("--plant", run.plant_path, "plant JSON")->required();
  cmd_run->add_option("--T", run.cfg.T, "open-loop horizon (0 = schedule)");
  cmd_run->add_option("--k-hat", run.k_hat, "assumed expanding count");
  cmd_run->add_option("--tau", run.cfg.tau, "hop length");
  cmd_run->add_option("--alpha", run.cfg.alpha, "probe gain (0 = auto)");
  cmd_run->add_option("--gamma", run.cfg.gamma, "stopping ratio");
  cmd_run->add_option("--epsilon", run.cfg.epsilon, "projector budget");
  cmd_run->add_option("--delta", run.cfg.delta, "basis budget (0 = auto)");
  cmd_run->add_option("--omega-max", run.cfg.omega_max, "wait cap (0 = auto)");
  cmd_run->add_option("--post-horizon", run.cfg.post_horizon,
                      "closed-loop steps (0 = auto)");
  cmd_run->add_option("--guard", run.cfg.guard, "overflow guard");
  cmd_run->add_option("--lqr-q", run.cfg.lqr_q, "state weight");
  cmd_run->add_option("--lqr-r", run.cfg.lqr_r, "input weight");
  cmd_run->add_option("--seed", run.cfg.seed, "noise seed");
  cmd_run->add_option("--csv", run.csv_path, "trajectory CSV path");
  cmd_run->add_option("--report", run.report_path, "report JSON path");
  cmd_run->add_option("--settle-window", run.settle.window, "");
  cmd_run->add_option("--settle-factor", run.settle.threshold_factor, "");

  // --- sweep ---------------------------------------------------------------
  lts::harness::SweepConfig sweep;
  std::string sweep_out, sweep_config_path;
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "seed sweep to CSV");
  cmd_sweep->add_option("--config", sweep_config_path, "sweep config JSON");
  auto* opt_n = cmd_sweep->add_option("--n", sweep.n_list, "state dimensions");
  auto* opt_sigma =
      cmd_sweep->add_option("--sigma", sweep.sigma_list, "noise levels");
  auto* opt_seeds = cmd_sweep->add_option("--seeds", sweep.seeds, "seed count");
  auto* opt_k = cmd_sweep->add_option("--k", sweep.k, "expanding modes");
  auto* opt_m = cmd_sweep->add_option("--m", sweep.m, "input dimension");
  auto* opt_T = cmd_sweep->add_option("--T", sweep.T, "horizon (0 = schedule)");
  auto* opt_tau = cmd_sweep->add_option("--tau", sweep.learner.tau, "");
  auto* opt_ps =
      cmd_sweep->add_option("--plant-seed", sweep.plant_seed, "");
  auto* opt_threads = cmd_sweep->add_option("--threads", sweep.threads, "");
  cmd_sweep->add_option("--out", sweep_out, "aggregate CSV path")->required();

  // --- baseline ------------------------------------------------------------
  std::string base_plant, base_report;
  int base_cap = 0;
  std::uint64_t base_seed = 1;
  lts::harness::SettleParams base_settle;
  CLI::App* cmd_base =
      app.add_subcommand("baseline", "naive full-identification run");
  cmd_base->add_option("--plant", base_plant, "plant JSON")->required();
  cmd_base->add_option("--horizon-cap", base_cap, "total step budget");
  cmd_base->add_option("--seed", base_seed, "noise seed");
  cmd_base->add_option("--report", base_report, "report JSON path");

  // --- check-bounds ----------------------------------------------------------
  RunOptions chk;
  lts::certify::ConstantParams chk_params;
  std::string chk_out;
  CLI::App* cmd_chk = app.add_subcommand(
      "check-bounds", "run and evaluate every certified bound");
  cmd_chk->add_option("--plant", chk.plant_path, "plant JSON")->required();
  cmd_chk->add_option("--T", chk.cfg.T, "open-loop horizon (0 = schedule)");
  cmd_chk->add_option("--k-hat", chk.k_hat, "");
  cmd_chk->add_option("--tau", chk.cfg.tau, "");
  cmd_chk->add_option("--alpha", chk.cfg.alpha, "");
  cmd_chk->add_option("--gamma", chk.cfg.gamma, "");
  cmd_chk->add_option("--epsilon", chk.cfg.epsilon, "");
  cmd_chk->add_option("--seed", chk.cfg.seed, "");
  cmd_chk->add_option("--theta", chk_params.theta, "");
  cmd_chk->add_option("--eps1", chk_params.eps1, "");
  cmd_chk->add_option("--eps2", chk_params.eps2, "");
  cmd_chk->add_option("--eps4", chk_params.eps4, "");
  cmd_chk->add_option("--gelfand-horizon", chk_params.gelfand_horizon, "");
  cmd_chk->add_option("--out", chk_out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) {
      lts::plant::PlantGenConfig pc;
      pc.n = gen.n;
      pc.k = gen.k;
      pc.m = gen.m;
      pc.unstable_lo = gen.unstable_lo;
      pc.unstable_hi = gen.unstable_hi;
      pc.stable_lo = gen.stable_lo;
      pc.stable_hi = gen.stable_hi;
      pc.cond_limit = gen.cond_limit;
      pc.noise = make_noise(gen.noise_kind, gen.sigma, gen.noise_c);
      auto rng = lts::make_rng(gen.seed);
      lts::plant::LtiPlant plant = lts::plant::random_plant(pc, rng);
      plant.seed = gen.seed;
      lts::plant::save_plant(plant, gen.out);
      std::cout << "wrote " << gen.out << "\n";
      return kExitOk;
    }

    if (cmd_run->parsed()) {
      if (run.cfg.T < 0 ||
          (cmd_run->count("--T") > 0 && run.cfg.T == 0)) {
        std::cerr << "run: --T must be a positive horizon\n";
        return kExitUsage;
      }
      return do_run(run);
    }

    if (cmd_sweep->parsed()) {
      if (!sweep_config_path.empty()) {
        std::ifstream in(sweep_config_path);
        if (!in) {
          std::cerr << "cannot read " << sweep_config_path << "\n";
          return kExitDomain;
        }
        nlohmann::json j;
        in >> j;
        lts::harness::SweepConfig file_cfg;
        if (j.contains("n")) file_cfg.n_list = j["n"].get<std::vector<int>>();
        if (j.contains("sigma"))
          file_cfg.sigma_list = j["sigma"].get<std::vector<double>>();
        if (j.contains("seeds")) file_cfg.seeds = j["seeds"].get<int>();
        if (j.contains("k")) file_cfg.k = j["k"].get<int>();
        if (j.contains("m")) file_cfg.m = j["m"].get<int>();
        if (j.contains("T")) file_cfg.T = j["T"].get<int>();
        if (j.contains("tau")) file_cfg.learner.tau = j["tau"].get<int>();
        if (j.contains("plant_seed"))
          file_cfg.plant_seed = j["plant_seed"].get<std::uint64_t>();
        if (j.contains("threads")) file_cfg.threads = j["threads"].get<int>();
        // Flags override file values.
        if (!*opt_n) sweep.n_list = file_cfg.n_list;
        if (!*opt_sigma) sweep.sigma_list = file_cfg.sigma_list;
        if (!*opt_seeds) sweep.seeds = file_cfg.seeds;
        if (!*opt_k) sweep.k = file_cfg.k;
        if (!*opt_m) sweep.m = file_cfg.m;
        if (!*opt_T) sweep.T = file_cfg.T;
        if (!*opt_tau) sweep.learner.tau = file_cfg.learner.tau;
        if (!*opt_ps) sweep.plant_seed = file_cfg.plant_seed;
        if (!*opt_threads) sweep.threads = file_cfg.threads;
      }
      if (sweep.n_list.empty() || sweep.sigma_list.empty() ||
          sweep.seeds < 1) {
        std::cerr << "sweep: axes must be nonempty\n";
        return kExitUsage;
      }
      auto records = lts::harness::run_sweep(sweep);
      auto summaries = lts::harness::summarize(records);
      std::ofstream out(sweep_out);
      if (!out) {
        std::cerr << "cannot write " << sweep_out << "\n";
        return kExitDomain;
      }
      lts::harness::write_sweep_csv(out, records, summaries);
      std::cout << "wrote " << sweep_out << " (" << records.size()
                << " runs)\n";
      return kExitOk;
    }

    if (cmd_base->parsed()) {
      lts::plant::LtiPlant plant = lts::plant::load_plant(base_plant);
      int cap = base_cap > 0
                    ? base_cap
                    : std::max(1024, 2 * (plant.n() + plant.m() * plant.n()));
      auto rec = lts::harness::baseline_full_id(plant, cap, base_seed,
                                                base_settle);
      nlohmann::json j;
      j["seed"] = rec.seed;
      j["n"] = rec.n;
      j["k"] = rec.k;
      j["m"] = rec.m;
      j["status"] = rec.status;
      j["steps_to_stabilize"] = rec.steps_to_stabilize;
      j["learning_steps"] = rec.learning_steps;
      j["max_norm"] = rec.max_norm;
      if (base_report.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::ofstream out(base_report);
        if (!out) {
          std::cerr << "cannot write " << base_report << "\n";
          return kExitDomain;
        }
        out << j.dump(2) << "\n";
      }
      return kExitOk;
    }

    if (cmd_chk->parsed()) {
      lts::plant::LtiPlant plant = lts::plant::load_plant(chk.plant_path);
      if (!plant.truth) {
        std::cerr << "check-bounds: plant file carries no usable k\n";
        return kExitDomain;
      }
      lts::lts0n::Config cfg = resolve_learner(plant, chk.cfg, chk.k_hat);
      lts::lts0n::RunResult res = lts::lts0n::run_lts0n(plant, cfg);
      if (res.status != lts::lts0n::RunStatus::complete) {
        std::cerr << "check-bounds: run failed: " << res.error << "\n";
        return kExitRun;
      }
      chk_params.tau = cfg.tau;
      chk_params.m = plant.m();
      chk_params.alpha = res.resolved_alpha;
      chk_params.gamma = cfg.gamma;
      chk_params.epsilon = cfg.epsilon;

      nlohmann::json j;
      j["constants"] =
          lts::certify::to_json(lts::certify::compute_constants(plant,
                                                                chk_params));
      j["report"] = lts::certify::to_json(
          lts::certify::error_report(plant, res, cfg, chk_params));
      const auto& s = *plant.truth;
      j["theory_T"] = lts::certify::theory_T_bound(
          plant.n(), s.k, cfg.epsilon,
          lts::certify::gap_constant(s.eigenvalues.head(s.k)),
          chk_params.theta, std::max(plant.noise_bound(), 1e-9),
          std::abs(s.eigenvalues(s.k - 1)), std::abs(s.eigenvalues(s.k)));
      if (chk_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::ofstream out(chk_out);
        if (!out) {
          std::cerr << "cannot write " << chk_out << "\n";
          return kExitDomain;
        }
        out << j.dump(2) << "\n";
      }
      return kExitOk;
    }
  } catch (const lts::plant::OverflowError& e) {
    std::cerr << e.what() << "\n";
    return kExitRun;
  } catch (const lts::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kExitRun;
  }
  return kExitUsage;
}
