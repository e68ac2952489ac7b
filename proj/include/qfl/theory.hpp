#pragma once

// Empirical checks of the convergence analysis on problems that satisfy its
// assumptions by construction: smooth, strongly convex per-client quadratics
// with diagonal curvature and bounded gradient noise.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfl/dataset.hpp"
#include "qfl/random.hpp"

namespace qfl::theory {

struct TheoryParams {
  double L = 1.0;
  double mu = 1.0;
  /// Per-client gradient variance bounds sigma_i^2.
  std::vector<double> sigma2;
  /// Client weights w_i; empty means uniform over sigma2.
  std::vector<double> weights;
  double G2 = 1.0;
  std::size_t E = 1;

  void validate() const;

  /// max(8L/mu, E)
  double gamma() const;
  /// sum w_i^2 sigma_i^2 + 6 L Gamma + 8 (E-1)^2 G^2
  double B(double Gamma) const;
  /// 4 E^2 G^2 / |S|
  double C(std::size_t selected) const;
  /// (B + C)/mu + 2 L ||theta0 - theta*||^2
  double Psi(double Gamma, std::size_t selected, double initial_distance_sq) const;
  /// (2L/mu) * Psi / (T + gamma)
  double bound(std::size_t rounds, double Gamma, std::size_t selected,
               double initial_distance_sq) const;
};

/// 2 / (mu (t + gamma)).
double lr_schedule(std::size_t t, const TheoryParams& params);

struct QuadraticClient {
  /// Diagonal of A_i.
  Vector curvature;
  /// Minimizer a_i.
  Vector center;

  /// 0.5 (x - a)^T A (x - a)
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
};

struct FederatedQuadratic {
  std::vector<QuadraticClient> clients;
  std::vector<double> weights;
  double mu = 1.0;
  double L = 1.0;
  Vector optimum;
  /// F* = F(optimum).
  double optimal_value = 0.0;
  /// F* - sum w_i F_i*; every F_i* is 0 by construction.
  double heterogeneity_gap = 0.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(optimum.size()); }
  double value(const Vector& x) const;
};

/// Client curvatures are uniform in [mu, L]; client optima scatter around a
/// common center with standard deviation `heterogeneity`.
FederatedQuadratic synth_federated_quadratic(std::size_t num_clients, std::size_t dim,
                                             double heterogeneity, std::uint64_t seed,
                                             double mu = 1.0, double L = 4.0);

struct FedAvgOptions {
  std::size_t rounds = 200;
  std::size_t local_steps = 1;
  /// Std-dev of additive Gaussian noise on every stochastic gradient coordinate.
  double gradient_noise = 1.0;
  /// Regulate local steps per round from F_i(theta) / F_i(theta*).
  bool regulated = false;
  std::size_t step_cap = 8;
  /// Distance of theta0 from the optimum along a seeded random direction.
  double initial_distance = 2.0;
  std::uint64_t seed = 0;
};

struct FedAvgTrace {
  /// F(theta^t) - F* after rounds t = 1..T.
  std::vector<double> gaps;
  /// Mean local steps across clients per round.
  std::vector<double> mean_steps;
  std::size_t fixed_steps = 1;
  double initial_gap = 0.0;
};

/// Full-participation federated averaging with lr_schedule step sizes.
FedAvgTrace run_fedavg(const FederatedQuadratic& problem, const FedAvgOptions& options);

struct ConvergenceFitReport {
  std::size_t rounds = 0;
  std::vector<double> gaps;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares of log(gap_t) on log(t + gamma), with gaps[j] at t = j + 1.
ConvergenceFitReport fit_rate(std::span<const double> gaps, double gamma);

struct SubsetVariance {
  std::vector<std::size_t> selected;
  /// Mean d^2 over the alignment-selected subset.
  double selected_mean_sq = 0.0;
  /// Mean over equal-size subsets of their mean d^2.
  double random_mean_sq = 0.0;
  /// Smallest sum of d^2 over all equal-size subsets (exhaustive mode only).
  double min_subset_sum_sq = 0.0;
  double selected_sum_sq = 0.0;
  bool exhaustive = false;
  bool minimal = false;
};

inline constexpr std::size_t kMaxExhaustiveClients = 12;

/// Selects the k devices closest to `global_loss` with the federation's own
/// selection rule and compares against random subsets of size k: every
/// subset when N <= 12, otherwise `samples` uniform draws.
SubsetVariance subset_variance(std::span<const double> losses, double global_loss, std::size_t k,
                               std::size_t samples = 1000, std::uint64_t seed = 0);

struct VarianceReport {
  std::size_t k = 0;
  std::size_t N = 0;
  std::size_t instances = 0;
  double selected_variance = 0.0;
  double random_variance = 0.0;
  double bound_factor = 0.0;
  double slack = 0.05;
  std::size_t minimal_instances = 0;
  std::size_t selected_le_random_instances = 0;
  bool degenerate = false;
  bool bound_holds = false;
  bool minimality_holds = false;
};

/// Returns per-device losses for one randomized instance.
using LossProfile = std::function<std::vector<double>(std::size_t n, Rng& rng)>;

/// i.i.d. uniform losses in [lo, hi].
LossProfile uniform_losses(double lo = 0.2, double hi = 1.0);

/// Averages subset_variance over randomized loss profiles with the global
/// loss at the profile mean. With k == N the bound degenerates and the check
/// becomes selected == random.
VarianceReport variance_reduction_check(const LossProfile& profile, std::size_t k, std::size_t N,
                                        std::size_t instances, std::uint64_t seed,
                                        double slack = 0.05);

struct RoundTrace {
  std::vector<double> loss;
  std::vector<double> mean_budget;
  double fixed_budget = 1.0;
};

struct EfficiencyReport {
  std::size_t rounds_qfl = 0;
  std::size_t rounds_llmqfl = 0;
  bool reached = false;
  /// T_QFL / T_LLM-QFL.
  double rounds_ratio = 0.0;
  /// E[K_i^t] / K over the LLM-QFL rounds up to the threshold.
  double budget_ratio = 0.0;
};

/// First 1-based round whose loss is <= threshold, or 0.
std::size_t rounds_to_threshold(std::span<const double> loss, double threshold);

EfficiencyReport efficiency_ratio(const RoundTrace& qfl, const RoundTrace& llmqfl,
                                  double threshold);

RoundTrace to_round_trace(const FedAvgTrace& trace);

struct TheoryConfig {
  std::uint64_t seed = 7;

  std::size_t fit_clients = 8;
  std::size_t fit_dim = 4;
  double fit_mu = 1.0;
  double fit_L = 4.0;
  double fit_heterogeneity = 0.5;
  std::size_t fit_rounds = 200;
  std::size_t fit_local_steps = 1;
  double fit_gradient_noise = 1.0;
  double fit_initial_distance = 0.1;
  std::size_t fit_trials = 64;
  double fit_slope_lo = -1.3;
  double fit_slope_hi = -0.7;
  double fit_min_r2 = 0.95;

  std::size_t variance_clients = 10;
  std::vector<double> variance_fractions = {0.2, 0.5};
  std::size_t variance_instances = 500;
  double variance_slack = 0.05;

  std::size_t minimality_instances = 1000;
  std::size_t minimality_max_clients = 10;

  std::size_t efficiency_trials = 50;
  std::size_t efficiency_clients = 8;
  std::size_t efficiency_dim = 4;
  double efficiency_heterogeneity = 0.3;
  std::size_t efficiency_rounds = 200;
  std::size_t efficiency_local_steps = 2;
  std::size_t efficiency_step_cap = 8;
  double efficiency_gradient_noise = 0.05;
  double efficiency_threshold_fraction = 0.01;
  double efficiency_pass_rate = 0.8;

  void validate() const;
};

struct ClaimResult {
  std::string name;
  bool passed = false;
  nlohmann::json details;
};

struct VerificationReport {
  std::vector<ClaimResult> claims;
  nlohmann::json inputs;

  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Learning-rate schedule, rate fit, selection minimality, variance bound
/// and efficiency campaigns.
VerificationReport verify_theory(const TheoryConfig& config);

}  // namespace qfl::theory
