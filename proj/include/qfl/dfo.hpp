#pragma once

// Derivative-free minimizers under a hard iteration budget, and the rules
// that rescale that budget from a device/reference loss ratio.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qfl::dfo {

inline constexpr std::size_t kDefaultCap = 100;

/// Per-round iteration budget; 1 <= maxiter <= cap.
class Budget {
 public:
  explicit Budget(std::size_t maxiter, std::size_t cap = kDefaultCap);

  std::size_t maxiter() const noexcept { return maxiter_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t maxiter_;
  std::size_t cap_;
};

enum class Method { NelderMead, SPSA };

const char* to_string(Method method);

/// Upper bound on objective evaluations for one minimize() call.
/// Nelder-Mead: n+2 per iteration (a shrink step); the first iteration builds
/// the initial simplex with n+1. SPSA: the iterate plus a perturbation pair.
std::size_t evaluation_bound(Method method, std::size_t dim, std::size_t maxiter);

enum class TraceStatus { Completed, Aborted };

struct OptimizerTrace {
  /// Best objective value after each iteration, so it is non-increasing.
  std::vector<double> objective_history;
  std::vector<double> best_params;
  double best_value = 0.0;
  std::size_t evals_used = 0;
  std::size_t iterations = 0;
  TraceStatus status = TraceStatus::Completed;
  std::string diagnostic;

  bool aborted() const noexcept { return status == TraceStatus::Aborted; }
};

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
  double initial_step = 0.5;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  /// Replace the four coefficients above with dimension-scaled ones.
  bool adaptive = false;
};

struct SpsaOptions {
  double a = 0.2;
  double c = 0.15;
  double alpha = 0.602;
  double gamma = 0.101;
  double stability = 10.0;
};

struct MinimizeOptions {
  NelderMeadOptions nelder_mead;
  SpsaOptions spsa;
};

/// Runs exactly budget.maxiter() iterations unless the objective returns a
/// non-finite value, in which case the trace is returned with status Aborted
/// and everything recorded up to that point.
OptimizerTrace minimize(const Objective& objective, std::span<const double> x0,
                        const Budget& budget, Method method, std::uint64_t seed,
                        const MinimizeOptions& options = {});

enum class RegulationKind { Adaptive, Incremental, Logarithmic, DynamicWeighted };

const char* to_string(RegulationKind kind);

struct RegulationStrategy {
  RegulationKind kind = RegulationKind::Adaptive;
  std::size_t step = 1;
  double beta = 0.5;

  void validate() const;
};

/// Half-up rounding used by every regulation formula.
std::size_t round_half_up(double value);

/// Rescales `maxiter` from r = loss_dev / loss_ref and clamps to [1, cap].
/// Callers apply it only when loss_ref < loss_dev.
std::size_t regulate(const RegulationStrategy& strategy, std::size_t maxiter, double loss_dev,
                     double loss_ref, std::size_t cap = kDefaultCap);

}  // namespace qfl::dfo
