#include "qfl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qfl/dfo.hpp"
#include "qfl/error.hpp"
#include "qfl/fed.hpp"

namespace qfl::theory {

namespace {

double weight_of(const TheoryParams& p, std::size_t i) {
  if (!p.weights.empty()) return p.weights[i];
  return 1.0 / static_cast<double>(p.sigma2.size());
}

// Calls fn(subset) for every k-subset of [0, n) in lexicographic order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(std::span<const std::size_t>(idx));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

void TheoryParams::validate() const {
  if (!(mu > 0.0) || !(L >= mu)) throw ArgumentError("need L >= mu > 0");
  if (E < 1) throw ArgumentError("local steps E must be >= 1");
  if (G2 < 0.0) throw ArgumentError("G^2 must be >= 0");
  if (!weights.empty() && weights.size() != sigma2.size()) {
    throw ArgumentError("weights and sigma2 lengths differ");
  }
  for (double s : sigma2) {
    if (s < 0.0) throw ArgumentError("variance bounds must be >= 0");
  }
}

double TheoryParams::gamma() const {
  return std::max(8.0 * L / mu, static_cast<double>(E));
}

double TheoryParams::B(double Gamma) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < sigma2.size(); ++i) {
    const double w = weight_of(*this, i);
    acc += w * w * sigma2[i];
  }
  const double e1 = static_cast<double>(E) - 1.0;
  return acc + 6.0 * L * Gamma + 8.0 * e1 * e1 * G2;
}

double TheoryParams::C(std::size_t selected) const {
  if (selected == 0) throw ArgumentError("selected set must be non-empty");
  const double e = static_cast<double>(E);
  return 4.0 * e * e * G2 / static_cast<double>(selected);
}

double TheoryParams::Psi(double Gamma, std::size_t selected, double initial_distance_sq) const {
  return (B(Gamma) + C(selected)) / mu + 2.0 * L * initial_distance_sq;
}

double TheoryParams::bound(std::size_t rounds, double Gamma, std::size_t selected,
                           double initial_distance_sq) const {
  return (2.0 * L / mu) * Psi(Gamma, selected, initial_distance_sq) /
         (static_cast<double>(rounds) + gamma());
}

double lr_schedule(std::size_t t, const TheoryParams& params) {
  params.validate();
  return 2.0 / (params.mu * (static_cast<double>(t) + params.gamma()));
}

double QuadraticClient::value(const Vector& x) const {
  const Vector r = x - center;
  return 0.5 * r.dot(curvature.cwiseProduct(r));
}

Vector QuadraticClient::gradient(const Vector& x) const {
  return curvature.cwiseProduct(x - center);
}

double FederatedQuadratic::value(const Vector& x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < clients.size(); ++i) acc += weights[i] * clients[i].value(x);
  return acc;
}

FederatedQuadratic synth_federated_quadratic(std::size_t num_clients, std::size_t dim,
                                             double heterogeneity, std::uint64_t seed, double mu,
                                             double L) {
  if (num_clients < 1 || dim < 1) throw ArgumentError("need N >= 1 and d >= 1");
  if (!(mu > 0.0) || !(L >= mu)) throw ArgumentError("need L >= mu > 0");
  if (!(heterogeneity >= 0.0)) throw ArgumentError("heterogeneity must be >= 0");

  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Vector common(d);
  for (Eigen::Index j = 0; j < d; ++j) common[j] = standard_normal(rng);

  FederatedQuadratic p;
  p.mu = mu;
  p.L = L;
  p.weights.assign(num_clients, 1.0 / static_cast<double>(num_clients));
  for (std::size_t i = 0; i < num_clients; ++i) {
    QuadraticClient c;
    c.curvature.resize(d);
    c.center.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      c.curvature[j] = uniform(rng, mu, L);
      c.center[j] = common[j] + heterogeneity * standard_normal(rng);
    }
    if (heterogeneity == 0.0) c.center = common;
    p.clients.push_back(std::move(c));
  }

  // Diagonal curvature: the weighted optimum decouples per coordinate.
  Vector num = Vector::Zero(d);
  Vector den = Vector::Zero(d);
  for (std::size_t i = 0; i < num_clients; ++i) {
    num += p.weights[i] * p.clients[i].curvature.cwiseProduct(p.clients[i].center);
    den += p.weights[i] * p.clients[i].curvature;
  }
  p.optimum = num.cwiseQuotient(den);
  p.optimal_value = p.value(p.optimum);
  p.heterogeneity_gap = p.optimal_value;
  return p;
}

FedAvgTrace run_fedavg(const FederatedQuadratic& problem, const FedAvgOptions& options) {
  if (options.rounds < 1) throw ArgumentError("rounds must be >= 1");
  if (options.local_steps < 1) throw ArgumentError("local steps must be >= 1");

  TheoryParams params;
  params.mu = problem.mu;
  params.L = problem.L;
  params.E = options.local_steps;
  params.sigma2.assign(problem.clients.size(),
                       options.gradient_noise * options.gradient_noise *
                           static_cast<double>(problem.dim()));

  Rng rng(options.seed);
  const auto d = static_cast<Eigen::Index>(problem.dim());
  Vector direction(d);
  for (Eigen::Index j = 0; j < d; ++j) direction[j] = standard_normal(rng);
  direction.normalize();
  Vector theta = problem.optimum + options.initial_distance * direction;

  FedAvgTrace trace;
  trace.fixed_steps = options.local_steps;
  trace.initial_gap = problem.value(theta) - problem.optimal_value;

  const dfo::RegulationStrategy adaptive{dfo::RegulationKind::Adaptive, 1, 0.5};
  for (std::size_t t = 0; t < options.rounds; ++t) {
    const double eta = lr_schedule(t, params);
    Vector next = Vector::Zero(d);
    double steps_total = 0.0;
    for (std::size_t i = 0; i < problem.clients.size(); ++i) {
      const auto& client = problem.clients[i];
      std::size_t steps = options.local_steps;
      if (options.regulated) {
        const double current = client.value(theta);
        const double reference = std::max(client.value(problem.optimum), 1e-12);
        if (reference < current) {
          steps = dfo::regulate(adaptive, options.local_steps, current, reference,
                                std::max(options.step_cap, options.local_steps));
        }
      }
      steps_total += static_cast<double>(steps);
      Vector x = theta;
      for (std::size_t k = 0; k < steps; ++k) {
        Vector g = client.gradient(x);
        for (Eigen::Index j = 0; j < d; ++j) g[j] += options.gradient_noise * standard_normal(rng);
        x -= eta * g;
      }
      next += problem.weights[i] * x;
    }
    theta = next;
    trace.gaps.push_back(problem.value(theta) - problem.optimal_value);
    trace.mean_steps.push_back(steps_total / static_cast<double>(problem.clients.size()));
  }
  return trace;
}

ConvergenceFitReport fit_rate(std::span<const double> gaps, double gamma) {
  if (gaps.size() < 10) throw ArgumentError("rate fit needs at least 10 points");
  ConvergenceFitReport r;
  r.rounds = gaps.size();
  r.gaps.assign(gaps.begin(), gaps.end());
  const auto n = static_cast<double>(gaps.size());
  std::vector<double> xs(gaps.size());
  std::vector<double> ys(gaps.size());
  for (std::size_t j = 0; j < gaps.size(); ++j) {
    if (!(gaps[j] > 0.0) || !std::isfinite(gaps[j])) {
      throw ArgumentError("rate fit needs positive finite gaps");
    }
    xs[j] = std::log(static_cast<double>(j + 1) + gamma);
    ys[j] = std::log(gaps[j]);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    sxx += (xs[j] - mx) * (xs[j] - mx);
    sxy += (xs[j] - mx) * (ys[j] - my);
    syy += (ys[j] - my) * (ys[j] - my);
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  // A constant series is fit exactly by a flat line.
  r.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return r;
}

SubsetVariance subset_variance(std::span<const double> losses, double global_loss, std::size_t k,
                               std::size_t samples, std::uint64_t seed) {
  const std::size_t n = losses.size();
  if (k < 1 || k > n) throw ArgumentError("subset size must be in [1, N]");

  std::vector<double> sq(n);
  std::vector<fed::Candidate> candidates(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = losses[i] - global_loss;
    sq[i] = d * d;
    candidates[i] = {static_cast<int>(i), losses[i]};
  }
  const double fraction = static_cast<double>(k) / static_cast<double>(n);
  const auto ids = fed::select_clients(candidates, global_loss, fraction);

  SubsetVariance out;
  for (int id : ids) {
    out.selected.push_back(static_cast<std::size_t>(id));
    out.selected_sum_sq += sq[static_cast<std::size_t>(id)];
  }
  out.selected_mean_sq = out.selected_sum_sq / static_cast<double>(k);

  if (n <= kMaxExhaustiveClients) {
    out.exhaustive = true;
    double total = 0.0;
    std::size_t count = 0;
    double best = std::numeric_limits<double>::infinity();
    for_each_subset(n, k, [&](std::span<const std::size_t> subset) {
      double s = 0.0;
      for (std::size_t i : subset) s += sq[i];
      best = std::min(best, s);
      total += s / static_cast<double>(k);
      ++count;
    });
    out.random_mean_sq = total / static_cast<double>(count);
    out.min_subset_sum_sq = best;
    out.minimal = out.selected_sum_sq <= best;
  } else {
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    double total = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      std::iota(idx.begin(), idx.end(), 0);
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        std::swap(idx[j], idx[j + uniform_index(rng, n - j)]);
        acc += sq[idx[j]];
      }
      total += acc / static_cast<double>(k);
    }
    out.random_mean_sq = total / static_cast<double>(std::max<std::size_t>(samples, 1));
    // Sorting proves minimality without enumeration.
    std::vector<double> sorted = sq;
    std::sort(sorted.begin(), sorted.end());
    out.min_subset_sum_sq = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
    out.minimal = out.selected_sum_sq <= out.min_subset_sum_sq;
  }
  return out;
}

LossProfile uniform_losses(double lo, double hi) {
  return [lo, hi](std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(rng, lo, hi);
    return v;
  };
}

VarianceReport variance_reduction_check(const LossProfile& profile, std::size_t k, std::size_t N,
                                        std::size_t instances, std::uint64_t seed, double slack) {
  if (k < 1 || k > N) throw ArgumentError("need 1 <= k <= N");
  if (instances < 1) throw ArgumentError("need at least one instance");
  VarianceReport r;
  r.k = k;
  r.N = N;
  r.instances = instances;
  r.slack = slack;
  r.bound_factor = 1.0 - static_cast<double>(k) / static_cast<double>(N);
  r.degenerate = k == N;

  Rng rng(seed);
  double sel = 0.0;
  double rnd = 0.0;
  for (std::size_t s = 0; s < instances; ++s) {
    const auto losses = profile(N, rng);
    const double global = std::accumulate(losses.begin(), losses.end(), 0.0) /
                          static_cast<double>(losses.size());
    const auto v = subset_variance(losses, global, k, 1000, rng());
    sel += v.selected_mean_sq;
    rnd += v.random_mean_sq;
    if (v.minimal) ++r.minimal_instances;
    if (v.selected_mean_sq <= v.random_mean_sq * (1.0 + 1e-12)) ++r.selected_le_random_instances;
  }
  r.selected_variance = sel / static_cast<double>(instances);
  r.random_variance = rnd / static_cast<double>(instances);
  r.minimality_holds = r.minimal_instances == instances && r.selected_le_random_instances == instances;
  if (r.degenerate) {
    r.bound_holds =
        std::abs(r.selected_variance - r.random_variance) <= 1e-12 * std::max(1.0, r.random_variance);
  } else {
    r.bound_holds = r.selected_variance <= (1.0 + slack) * r.bound_factor * r.random_variance;
  }
  return r;
}

std::size_t rounds_to_threshold(std::span<const double> loss, double threshold) {
  for (std::size_t t = 0; t < loss.size(); ++t) {
    if (loss[t] <= threshold) return t + 1;
  }
  return 0;
}

EfficiencyReport efficiency_ratio(const RoundTrace& qfl, const RoundTrace& llmqfl,
                                  double threshold) {
  EfficiencyReport r;
  r.rounds_qfl = rounds_to_threshold(qfl.loss, threshold);
  r.rounds_llmqfl = rounds_to_threshold(llmqfl.loss, threshold);
  r.reached = r.rounds_qfl > 0 && r.rounds_llmqfl > 0;
  if (!r.reached) return r;
  r.rounds_ratio = static_cast<double>(r.rounds_qfl) / static_cast<double>(r.rounds_llmqfl);
  if (!llmqfl.mean_budget.empty() && llmqfl.fixed_budget > 0.0) {
    const std::size_t upto = std::min(r.rounds_llmqfl, llmqfl.mean_budget.size());
    const double mean =
        std::accumulate(llmqfl.mean_budget.begin(),
                        llmqfl.mean_budget.begin() + static_cast<std::ptrdiff_t>(upto), 0.0) /
        static_cast<double>(upto);
    r.budget_ratio = mean / llmqfl.fixed_budget;
  }
  return r;
}

RoundTrace to_round_trace(const FedAvgTrace& trace) {
  return {trace.gaps, trace.mean_steps, static_cast<double>(trace.fixed_steps)};
}

void TheoryConfig::validate() const {
  auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  need(fit_clients >= 1, "fit.clients", "must be >= 1");
  need(fit_dim >= 1, "fit.dim", "must be >= 1");
  need(fit_mu > 0.0, "fit.mu", "must be > 0");
  need(fit_L >= fit_mu, "fit.L", "must be >= fit_mu");
  need(fit_heterogeneity >= 0.0, "fit.heterogeneity", "must be >= 0");
  need(fit_rounds >= 10, "fit.rounds", "must be >= 10");
  need(fit_local_steps >= 1, "fit.local_steps", "must be >= 1");
  need(fit_gradient_noise >= 0.0, "fit.gradient_noise", "must be >= 0");
  need(fit_initial_distance >= 0.0, "fit.initial_distance", "must be >= 0");
  need(fit_trials >= 1, "fit.trials", "must be >= 1");
  need(fit_slope_lo < fit_slope_hi, "fit.slope_lo", "must be < fit_slope_hi");
  need(fit_min_r2 >= 0.0 && fit_min_r2 <= 1.0, "fit.min_r2", "must be in [0, 1]");
  need(variance_clients >= 1 && variance_clients <= kMaxExhaustiveClients,
       "variance.clients", "must be in [1, 12]");
  need(!variance_fractions.empty(), "variance.fractions", "must be non-empty");
  for (double f : variance_fractions) {
    need(f > 0.0 && f <= 1.0, "variance.fractions", "entries must be in (0, 1]");
  }
  need(variance_instances >= 100, "variance.instances", "must be >= 100");
  need(variance_slack >= 0.0, "variance.slack", "must be >= 0");
  need(minimality_instances >= 1, "minimality.instances", "must be >= 1");
  need(minimality_max_clients >= 2 && minimality_max_clients <= kMaxExhaustiveClients,
       "minimality.max_clients", "must be in [2, 12]");
  need(efficiency_trials >= 1, "efficiency.trials", "must be >= 1");
  need(efficiency_clients >= 1, "efficiency.clients", "must be >= 1");
  need(efficiency_dim >= 1, "efficiency.dim", "must be >= 1");
  need(efficiency_heterogeneity >= 0.0, "efficiency.heterogeneity", "must be >= 0");
  need(efficiency_rounds >= 1, "efficiency.rounds", "must be >= 1");
  need(efficiency_local_steps >= 1, "efficiency.local_steps", "must be >= 1");
  need(efficiency_step_cap >= efficiency_local_steps, "efficiency.step_cap",
       "must be >= efficiency_local_steps");
  need(efficiency_gradient_noise >= 0.0, "efficiency.gradient_noise", "must be >= 0");
  need(efficiency_threshold_fraction > 0.0 && efficiency_threshold_fraction < 1.0,
       "efficiency.threshold_fraction", "must be in (0, 1)");
  need(efficiency_pass_rate >= 0.0 && efficiency_pass_rate <= 1.0, "efficiency.pass_rate",
       "must be in [0, 1]");
}

bool VerificationReport::all_passed() const {
  return !claims.empty() &&
         std::all_of(claims.begin(), claims.end(), [](const ClaimResult& c) { return c.passed; });
}

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json j;
  j["inputs"] = inputs;
  j["all_passed"] = all_passed();
  j["claims"] = nlohmann::json::array();
  for (const auto& c : claims) {
    j["claims"].push_back({{"name", c.name}, {"passed", c.passed}, {"details", c.details}});
  }
  return j;
}

namespace {

enum class Stream : std::uint64_t { Fit = 1, Minimality, Variance, Efficiency };

std::uint64_t stream_seed(const TheoryConfig& c, Stream s, std::uint64_t trial = 0) {
  return derive_seed(c.seed, static_cast<std::uint64_t>(s), trial);
}

nlohmann::json config_json(const TheoryConfig& c) {
  return {{"seed", c.seed},
          {"fit_clients", c.fit_clients},
          {"fit_dim", c.fit_dim},
          {"fit_mu", c.fit_mu},
          {"fit_L", c.fit_L},
          {"fit_heterogeneity", c.fit_heterogeneity},
          {"fit_rounds", c.fit_rounds},
          {"fit_local_steps", c.fit_local_steps},
          {"fit_gradient_noise", c.fit_gradient_noise},
          {"fit_initial_distance", c.fit_initial_distance},
          {"fit_trials", c.fit_trials},
          {"fit_slope_lo", c.fit_slope_lo},
          {"fit_slope_hi", c.fit_slope_hi},
          {"fit_min_r2", c.fit_min_r2},
          {"variance_clients", c.variance_clients},
          {"variance_fractions", c.variance_fractions},
          {"variance_instances", c.variance_instances},
          {"variance_slack", c.variance_slack},
          {"minimality_instances", c.minimality_instances},
          {"minimality_max_clients", c.minimality_max_clients},
          {"efficiency_trials", c.efficiency_trials},
          {"efficiency_clients", c.efficiency_clients},
          {"efficiency_dim", c.efficiency_dim},
          {"efficiency_heterogeneity", c.efficiency_heterogeneity},
          {"efficiency_rounds", c.efficiency_rounds},
          {"efficiency_local_steps", c.efficiency_local_steps},
          {"efficiency_step_cap", c.efficiency_step_cap},
          {"efficiency_gradient_noise", c.efficiency_gradient_noise},
          {"efficiency_threshold_fraction", c.efficiency_threshold_fraction},
          {"efficiency_pass_rate", c.efficiency_pass_rate}};
}

ClaimResult check_lr_schedule(const TheoryConfig& c) {
  TheoryParams p;
  p.mu = c.fit_mu;
  p.L = c.fit_L;
  p.E = c.fit_local_steps;
  bool ok = true;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t <= c.fit_rounds; ++t) {
    const double eta = lr_schedule(t, p);
    const double expect = 2.0 / (p.mu * (static_cast<double>(t) + p.gamma()));
    ok = ok && eta > 0.0 && eta < prev && eta == expect;
    prev = eta;
  }
  return {"lr_schedule", ok,
          {{"gamma", p.gamma()}, {"eta_0", lr_schedule(0, p)}, {"eta_T", prev}}};
}

ClaimResult check_rate_fit(const TheoryConfig& c) {
  std::vector<double> mean(c.fit_rounds, 0.0);
  double gamma = 0.0;
  for (std::size_t trial = 0; trial < c.fit_trials; ++trial) {
    const auto problem = synth_federated_quadratic(c.fit_clients, c.fit_dim, c.fit_heterogeneity,
                                                   stream_seed(c, Stream::Fit), c.fit_mu, c.fit_L);
    FedAvgOptions o;
    o.rounds = c.fit_rounds;
    o.local_steps = c.fit_local_steps;
    o.gradient_noise = c.fit_gradient_noise;
    o.initial_distance = c.fit_initial_distance;
    o.seed = stream_seed(c, Stream::Fit, trial + 1);
    const auto trace = run_fedavg(problem, o);
    for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += trace.gaps[t];
    TheoryParams p;
    p.mu = problem.mu;
    p.L = problem.L;
    p.E = o.local_steps;
    gamma = p.gamma();
  }
  for (double& g : mean) g /= static_cast<double>(c.fit_trials);
  const auto fit = fit_rate(mean, gamma);
  const bool ok = fit.slope >= c.fit_slope_lo && fit.slope <= c.fit_slope_hi &&
                  fit.r2 >= c.fit_min_r2;
  return {"rate_fit", ok,
          {{"slope", fit.slope},
           {"intercept", fit.intercept},
           {"r2", fit.r2},
           {"gamma", gamma},
           {"band", {c.fit_slope_lo, c.fit_slope_hi}},
           {"final_gap", mean.back()}}};
}

ClaimResult check_minimality(const TheoryConfig& c) {
  Rng rng(stream_seed(c, Stream::Minimality));
  std::size_t hits = 0;
  for (std::size_t s = 0; s < c.minimality_instances; ++s) {
    const std::size_t n = 2 + uniform_index(rng, c.minimality_max_clients - 1);
    const std::size_t k = 1 + uniform_index(rng, n);
    std::vector<double> losses(n);
    for (double& x : losses) x = uniform01(rng);
    const double global = uniform01(rng);
    if (subset_variance(losses, global, k).minimal) ++hits;
  }
  return {"selection_minimality", hits == c.minimality_instances,
          {{"instances", c.minimality_instances}, {"minimal", hits}}};
}

ClaimResult check_variance(const TheoryConfig& c) {
  bool ok = true;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t f = 0; f < c.variance_fractions.size(); ++f) {
    const std::size_t k = fed::selection_count(c.variance_fractions[f], c.variance_clients);
    const auto r = variance_reduction_check(uniform_losses(), k, c.variance_clients,
                                            c.variance_instances,
                                            stream_seed(c, Stream::Variance, f), c.variance_slack);
    ok = ok && r.bound_holds && r.minimality_holds;
    rows.push_back({{"fraction", c.variance_fractions[f]},
                    {"k", r.k},
                    {"N", r.N},
                    {"selected_variance", r.selected_variance},
                    {"random_variance", r.random_variance},
                    {"bound_factor", r.bound_factor},
                    {"degenerate", r.degenerate},
                    {"bound_holds", r.bound_holds},
                    {"minimality_holds", r.minimality_holds}});
  }
  return {"variance_reduction", ok, {{"slack", c.variance_slack}, {"cases", rows}}};
}

ClaimResult check_efficiency(const TheoryConfig& c) {
  std::size_t wins = 0;
  std::size_t reached = 0;
  double ratio_sum = 0.0;
  double budget_sum = 0.0;
  for (std::size_t trial = 0; trial < c.efficiency_trials; ++trial) {
    const auto problem =
        synth_federated_quadratic(c.efficiency_clients, c.efficiency_dim,
                                  c.efficiency_heterogeneity,
                                  stream_seed(c, Stream::Efficiency, 2 * trial));
    FedAvgOptions o;
    o.rounds = c.efficiency_rounds;
    o.local_steps = c.efficiency_local_steps;
    o.gradient_noise = c.efficiency_gradient_noise;
    o.step_cap = c.efficiency_step_cap;
    o.seed = stream_seed(c, Stream::Efficiency, 2 * trial + 1);
    const auto fixed = run_fedavg(problem, o);
    o.regulated = true;
    const auto regulated = run_fedavg(problem, o);
    const double threshold = c.efficiency_threshold_fraction * fixed.initial_gap;
    const auto r = efficiency_ratio(to_round_trace(fixed), to_round_trace(regulated), threshold);
    if (!r.reached) continue;
    ++reached;
    ratio_sum += r.rounds_ratio;
    budget_sum += r.budget_ratio;
    if (r.rounds_ratio >= 1.0) ++wins;
  }
  const double rate = static_cast<double>(wins) / static_cast<double>(c.efficiency_trials);
  return {"efficiency",
          rate >= c.efficiency_pass_rate,
          {{"trials", c.efficiency_trials},
           {"reached", reached},
           {"ratio_ge_1", wins},
           {"pass_rate", rate},
           {"required_rate", c.efficiency_pass_rate},
           {"mean_rounds_ratio", reached ? ratio_sum / static_cast<double>(reached) : 0.0},
           {"mean_budget_ratio", reached ? budget_sum / static_cast<double>(reached) : 0.0}}};
}

}  // namespace

VerificationReport verify_theory(const TheoryConfig& config) {
  config.validate();
  VerificationReport report;
  report.inputs = config_json(config);
  report.claims.push_back(check_lr_schedule(config));
  report.claims.push_back(check_rate_fit(config));
  report.claims.push_back(check_minimality(config));
  report.claims.push_back(check_variance(config));
  report.claims.push_back(check_efficiency(config));
  return report;
}

}  // namespace qfl::theory
