// Acceptance checks, one PASS/FAIL line per criterion. Tolerances and trial
// counts are fixed here; nothing is read from the environment.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qfl/commands.hpp"
#include "qfl/config.hpp"
#include "qfl/dataprep.hpp"
#include "qfl/fed.hpp"
#include "qfl/qmodels.hpp"
#include "qfl/qsim.hpp"
#include "qfl/theory.hpp"
#include "support/oracles.hpp"

using namespace qfl;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = QFL_SOURCE_DIR;

struct Outcome {
  bool passed = false;
  std::string detail;
};

fed::FedConfig preset(const std::string& name, const std::vector<std::string>& overrides) {
  return config::load_fed_config(config::resolve_config_path(name, kRoot), overrides);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

// 1. Baseline maxiter constant; LLM-QFL changes it at round 2 exactly where
// the reference loss is below the device loss.
Outcome regulation_signature() {
  const std::vector<std::string> ov = {"num_devices=10", "rounds=10", "init_maxiter=10",
                                       "fed.seed=0"};
  const auto base = fed::run_experiment(preset("qfl_baseline", ov));
  const auto llm_cfg = preset("llmqfl", ov);
  const auto llm = fed::run_experiment(llm_cfg);
  bool constant = base.records.size() == 10;
  for (const auto& r : base.records)
    for (const auto& d : r.devices) constant = constant && d.stats.maxiter_used == 10;

  bool guard_ok = llm.records.size() >= 2;
  std::size_t eligible = 0, changed = 0;
  if (guard_ok) {
    for (const auto& d : llm.records[0].devices) guard_ok = guard_ok && d.stats.maxiter_used == 10;
    for (std::size_t i = 0; i < llm.records[1].devices.size(); ++i) {
      const auto& now = llm.records[1].devices[i].stats;
      const double prev = llm.records[0].devices[i].stats.loss;
      const bool below = now.ref_loss < prev;
      eligible += below;
      const std::size_t expect =
          below ? dfo::regulate(llm_cfg.strategy, 10, prev, now.ref_loss, llm_cfg.cap) : 10;
      guard_ok = guard_ok && now.regulated == below && now.maxiter_used == expect;
      changed += now.maxiter_used != 10;
    }
  }
  const bool ok = constant && guard_ok && eligible > 0 && changed == eligible;
  return {ok, "baseline constant=" + std::to_string(constant) + ", round-2 eligible=" +
                  std::to_string(eligible) + " changed=" + std::to_string(changed)};
}

// 2. Cumulative evaluations LLM-QFL needs to reach the baseline's final
// training loss, relative to the baseline's total.
Outcome convergence_advantage() {
  constexpr int kSeeds = 20;
  constexpr double kBudgetFraction = 0.5;
  constexpr double kRequiredRate = 0.7;
  int wins = 0;
  std::vector<double> fractions;
  for (int s = 0; s < kSeeds; ++s) {
    const std::vector<std::string> ov = {"fed.seed=" + std::to_string(s)};
    const auto base = fed::run_experiment(preset("qfl_baseline", ov));
    const auto llm = fed::run_experiment(preset("llmqfl", ov));
    std::size_t base_total = 0;
    for (const auto& r : base.records) base_total += r.total_evals();
    const double threshold = base.records.back().global_train_loss;
    std::size_t cumulative = 0;
    double frac = INFINITY;
    for (const auto& r : llm.records) {
      cumulative += r.total_evals();
      if (r.global_train_loss <= threshold) {
        frac = static_cast<double>(cumulative) / static_cast<double>(base_total);
        break;
      }
    }
    fractions.push_back(frac);
    wins += frac <= kBudgetFraction;
  }
  std::sort(fractions.begin(), fractions.end());
  const double rate = static_cast<double>(wins) / kSeeds;
  return {rate >= kRequiredRate, std::to_string(wins) + "/" + std::to_string(kSeeds) +
                                     " seeds within 50% of baseline evals, median fraction " +
                                     fmt(fractions[kSeeds / 2], 3)};
}

// 3. Alignment selection vs exhaustive subset enumeration.
Outcome selection_minimality() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int minimal = 0;
  constexpr int kInstances = 1000;
  for (int t = 0; t < kInstances; ++t) {
    const int n = 2 + static_cast<int>(rng() % 9);
    std::vector<fed::Candidate> cands;
    for (int i = 0; i < n; ++i) cands.push_back({i, u(rng)});
    const double global = u(rng);
    const double fraction = (1.0 + static_cast<double>(rng() % static_cast<unsigned>(n))) / n;
    const auto chosen = fed::select_clients(cands, global, fraction);
    const std::size_t k = chosen.size();
    double picked = 0.0;
    for (int id : chosen) picked += std::pow(cands[static_cast<std::size_t>(id)].loss - global, 2);
    double best = INFINITY;
    for (unsigned mask = 0; mask < (1U << n); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (mask & (1U << i)) s += std::pow(cands[static_cast<std::size_t>(i)].loss - global, 2);
      best = std::min(best, s);
    }
    minimal += std::abs(picked - best) <= 1e-12;
  }
  return {minimal == kInstances, std::to_string(minimal) + "/1000 minimal"};
}

// 4. Mean selected d^2 against (1 - k/N) times the random-subset mean.
Outcome variance_bound() {
  constexpr std::size_t kN = 10;
  constexpr int kProfiles = 500;
  constexpr double kSlack = 0.05;
  bool ok = true;
  std::string detail;
  for (double frac : {0.2, 0.5}) {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    double selected = 0.0, random = 0.0;
    for (int t = 0; t < kProfiles; ++t) {
      std::vector<fed::Candidate> cands;
      double mean = 0.0;
      for (std::size_t i = 0; i < kN; ++i) {
        cands.push_back({static_cast<int>(i), u(rng)});
        mean += cands.back().loss / kN;
      }
      const auto chosen = fed::select_clients(cands, mean, frac);
      double sel = 0.0, all = 0.0;
      for (int id : chosen) sel += std::pow(cands[static_cast<std::size_t>(id)].loss - mean, 2);
      for (const auto& c : cands) all += std::pow(c.loss - mean, 2);
      selected += sel / chosen.size();
      // A uniform random k-subset has expected mean d^2 equal to the full mean.
      random += all / kN;
    }
    selected /= kProfiles;
    random /= kProfiles;
    const double factor = 1.0 - frac;
    const bool holds = selected <= (1.0 + kSlack) * factor * random;
    ok = ok && holds;
    if (!detail.empty()) detail += ", ";
    detail += "k/N=" + fmt(frac, 2) + ": " + fmt(selected) + " <= " + fmt(factor * random) +
              (holds ? "" : " (violated)");
  }
  return {ok, detail};
}

// 5. Log-log slope of the optimality gap under eta_t = 2 / (mu (t + gamma)).
Outcome rate_fit() {
  const theory::TheoryConfig c;
  std::vector<double> mean(200, 0.0);
  double gamma = 0.0;
  const auto problem = theory::synth_federated_quadratic(8, 4, c.fit_heterogeneity, 505, 1.0, 4.0);
  for (std::size_t trial = 0; trial < c.fit_trials; ++trial) {
    theory::FedAvgOptions o;
    o.rounds = 200;
    o.gradient_noise = c.fit_gradient_noise;
    o.initial_distance = c.fit_initial_distance;
    o.seed = 5050 + trial;
    const auto trace = theory::run_fedavg(problem, o);
    for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += trace.gaps[t] / c.fit_trials;
  }
  theory::TheoryParams p;
  p.mu = 1.0;
  p.L = 4.0;
  gamma = p.gamma();
  const auto fit = theory::fit_rate(mean, gamma);
  const bool ok = fit.slope >= -1.3 && fit.slope <= -0.7 && fit.r2 >= 0.95;
  return {ok, "slope " + fmt(fit.slope) + ", R^2 " + fmt(fit.r2)};
}

// 6. Relative-change stopping rule and the round cap.
Outcome termination() {
  const std::vector<double> flat = {0.50, 0.499}, moving = {0.50, 0.40};
  const auto a = fed::check_termination(flat, 2, 0.01, 10);
  const auto b = fed::check_termination(moving, 2, 0.01, 10);
  bool cap = true;
  for (std::size_t t = 1; t <= 10; ++t) {
    std::vector<double> h(t);
    for (std::size_t i = 0; i < t; ++i) h[i] = 1.0 / (i + 1);
    cap = cap && fed::check_termination(h, 10, 0.0, 10).stop;
  }
  const auto capped = fed::check_termination(moving, 10, 0.01, 10);
  const bool ok = a.stop && a.reason == fed::StopReason::Converged && !b.stop && capped.stop &&
                  capped.reason == fed::StopReason::MaxRounds && cap;
  return {ok, std::string("[0.50,0.499] ") + (a.stop ? "stops" : "continues") +
                  ", [0.50,0.40] " + (b.stop ? "stops" : "continues") + ", T_max stops"};
}

// 7. Random circuits against the dense kron oracle; parity interpretation
// against bitstring enumeration.
Outcome simulator_fidelity() {
  std::mt19937_64 rng(707);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 4;
    const std::size_t gates = 1 + rng() % 12;
    const auto c = oracle::random_circuit(rng, n, gates);
    worst = std::max(worst, oracle::max_deviation(qsim::run(c), oracle::state(c)));
  }
  double parity_worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 4;
    const auto c = oracle::random_circuit(rng, n, 10);
    const auto probs = qsim::run(c).probabilities();
    const auto p = qmodels::class_probabilities(probs, n, qmodels::Interpreter::ParityOfAllBits);
    parity_worst = std::max(parity_worst, std::abs(p[1] - oracle::parity_one_mass(probs, n, false)));
  }
  const bool ok = worst < 1e-10 && parity_worst < 1e-12;
  return {ok, "max amplitude deviation " + fmt(worst, 3) + ", parity deviation " +
                  fmt(parity_worst, 3)};
}

// 8. PCA against a Jacobi eigensolver on explicit covariance; one-hot rows.
Outcome pca_oracle() {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 7);
    const Eigen::Index n = d + 10 + static_cast<Eigen::Index>(rng() % 50);
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng) * (1.0 + static_cast<double>(j));
    const auto k = static_cast<std::size_t>(d);
    const auto model = dataprep::pca_fit(x, k);
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    oracle::jacobi_eigen(oracle::covariance(x), values, vectors);
    for (Eigen::Index c = 0; c < d; ++c) {
      const double same = (model.components.col(c) - vectors.col(c)).cwiseAbs().maxCoeff();
      const double flip = (model.components.col(c) + vectors.col(c)).cwiseAbs().maxCoeff();
      worst = std::max({worst, std::min(same, flip),
                        std::abs(model.explained_variance[c] - values[c])});
    }
  }
  const auto acgt = dataprep::one_hot_encode("ACGT");
  const std::vector<double> rows = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  const bool one_hot = acgt == rows;
  return {worst < 1e-8 && one_hot,
          "max component deviation " + fmt(worst, 3) + ", one-hot rows " +
              (one_hot ? "exact" : "differ")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. Two CLI runs with the same config and seed.
Outcome determinism() {
  const auto base = fs::temp_directory_path() / "qfl_acceptance_determinism";
  fs::remove_all(base);
  int codes = 0;
  for (const char* name : {"a", "b"}) {
    commands::RunOptions o;
    o.config = "llmqfl";
    o.overrides = {"rounds=4", "lambda=0.5", "selection_fraction=0.6", "epsilon=0.001"};
    o.seed = 42;
    o.out_dir = base / name;
    o.search_dir = kRoot;
    std::ostringstream out, err;
    codes += commands::cmd_run(o, out, err);
  }
  const auto a = slurp(base / "a" / commands::kRoundsFile);
  const auto b = slurp(base / "b" / commands::kRoundsFile);
  const bool same = codes == 0 && !a.empty() && a == b &&
                    slurp(base / "a" / commands::kObjectiveFile) ==
                        slurp(base / "b" / commands::kObjectiveFile);
  fs::remove_all(base);
  return {same, same ? "rounds.jsonl byte-identical (" + std::to_string(a.size()) + " bytes)"
                     : "outputs differ"};
}

// 10. Distillation never moves a local model away from the global one.
Outcome distillation_contraction() {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> feat(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> lam(0.0, 5.0);
  const auto model = qmodels::QModel::vqc(4);
  int violations = 0, equality_misses = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> local(8), global(8);
    for (auto& v : local) v = angle(rng);
    for (auto& v : global) v = angle(rng);
    EncodedDataset probe;
    const auto rows = static_cast<Eigen::Index>(1 + rng() % 6);
    probe.features.resize(rows, 4);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) probe.features(i, j) = feat(rng);
    probe.labels.assign(static_cast<std::size_t>(rows), 0);
    const double lambda = t % 4 == 0 ? 0.0 : lam(rng);
    const auto out = fed::distill_step(local, global, probe, lambda, model);
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      before += std::pow(local[i] - global[i], 2);
      after += std::pow(out.params[i] - global[i], 2);
    }
    violations += std::sqrt(after) > std::sqrt(before) * (1.0 + 1e-12);
    if (lambda == 0.0) equality_misses += out.params != local;
  }
  return {violations == 0 && equality_misses == 0,
          std::to_string(violations) + " expansions, " + std::to_string(equality_misses) +
              " lambda=0 changes"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
    double budget_seconds;
  };
  const std::vector<Criterion> criteria = {
      {"regulation signature", regulation_signature, 60},
      {"convergence advantage", convergence_advantage, 600},
      {"selection minimality", selection_minimality, 60},
      {"variance-reduction bound", variance_bound, 60},
      {"rate fit", rate_fit, 60},
      {"termination correctness", termination, 60},
      {"simulator fidelity", simulator_fidelity, 60},
      {"PCA oracle", pca_oracle, 60},
      {"determinism", determinism, 120},
      {"distillation contraction", distillation_contraction, 60},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= criteria[i].budget_seconds;
    const bool pass = o.passed && in_time;
    failed += !pass;
    std::printf("%s criterion %zu: %s (%s; %.1fs%s)\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, o.detail.c_str(), secs, in_time ? "" : ", over time budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
