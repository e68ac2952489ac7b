#include "qfl/dfo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qfl/error.hpp"
#include "qfl/random.hpp"

namespace qfl::dfo {

Budget::Budget(std::size_t maxiter, std::size_t cap) : maxiter_(maxiter), cap_(cap) {
  if (cap < 1) throw ArgumentError("budget cap must be >= 1");
  if (maxiter < 1 || maxiter > cap) {
    throw ArgumentError("maxiter " + std::to_string(maxiter) + " outside [1, " +
                        std::to_string(cap) + "]");
  }
}

const char* to_string(Method method) {
  return method == Method::NelderMead ? "nelder_mead" : "spsa";
}

const char* to_string(RegulationKind kind) {
  switch (kind) {
    case RegulationKind::Adaptive: return "adaptive";
    case RegulationKind::Incremental: return "incremental";
    case RegulationKind::Logarithmic: return "logarithmic";
    case RegulationKind::DynamicWeighted: return "dynamic_weighted";
  }
  return "?";
}

std::size_t evaluation_bound(Method method, std::size_t dim, std::size_t maxiter) {
  if (method == Method::NelderMead) return (dim + 2) * maxiter;
  return 3 * maxiter;
}

namespace {

using Point = std::vector<double>;

class NonFiniteObjective {};

// Counts evaluations and turns a non-finite value into an abort.
class CountingObjective {
 public:
  explicit CountingObjective(const Objective& f) : f_(f) {}

  double operator()(const Point& x) {
    ++evals_;
    const double v = f_(x);
    if (!std::isfinite(v)) throw NonFiniteObjective{};
    return v;
  }

  std::size_t evals() const noexcept { return evals_; }

 private:
  const Objective& f_;
  std::size_t evals_ = 0;
};

Point affine(const Point& base, const Point& dir_from, const Point& dir_to, double t) {
  // base + t * (dir_to - dir_from)
  Point out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + t * (dir_to[i] - dir_from[i]);
  return out;
}

class NelderMead {
 public:
  NelderMead(CountingObjective& f, std::span<const double> x0, const NelderMeadOptions& opt)
      : f_(f), opt_(opt), n_(x0.size()), start_(x0.begin(), x0.end()) {
    if (opt_.adaptive && n_ >= 2) {
      // Dimension-scaled coefficients keep the simplex from degenerating
      // in higher dimensions.
      const double n = static_cast<double>(n_);
      opt_.reflection = 1.0;
      opt_.expansion = 1.0 + 2.0 / n;
      opt_.contraction = 0.75 - 1.0 / (2.0 * n);
      opt_.shrink = 1.0 - 1.0 / n;
    }
  }

  // The first iteration builds the initial simplex (n + 1 evaluations); each
  // later one is a single transformation (at most n + 2).
  void iterate() {
    if (vertices_.empty()) {
      build_simplex();
      return;
    }
    const Point c = centroid();
    const Point& worst = vertices_[n_];
    const Point xr = affine(c, worst, c, opt_.reflection);
    const double fr = f_(xr);

    if (fr < values_[0]) {
      const Point xe = affine(c, worst, c, opt_.reflection * opt_.expansion);
      const double fe = f_(xe);
      if (fe < fr) {
        replace_worst(xe, fe);
      } else {
        replace_worst(xr, fr);
      }
    } else if (fr < values_[n_ - 1]) {
      replace_worst(xr, fr);
    } else if (fr < values_[n_]) {
      const Point xc = affine(c, worst, c, opt_.reflection * opt_.contraction);
      const double fc = f_(xc);
      if (fc <= fr) {
        replace_worst(xc, fc);
      } else {
        shrink();
      }
    } else {
      const Point xc = affine(c, c, worst, opt_.contraction);
      const double fc = f_(xc);
      if (fc < values_[n_]) {
        replace_worst(xc, fc);
      } else {
        shrink();
      }
    }
    order();
  }

  const Point& best() const { return vertices_[0]; }
  double best_value() const { return values_[0]; }

 private:
  void build_simplex() {
    vertices_.reserve(n_ + 1);
    values_.reserve(n_ + 1);
    vertices_.push_back(start_);
    values_.push_back(f_(start_));
    for (std::size_t i = 0; i < n_; ++i) {
      Point v = start_;
      v[i] += opt_.initial_step;
      values_.push_back(f_(v));
      vertices_.push_back(std::move(v));
    }
    order();
  }

  Point centroid() const {
    Point c(n_, 0.0);
    for (std::size_t v = 0; v < n_; ++v) {
      for (std::size_t i = 0; i < n_; ++i) c[i] += vertices_[v][i];
    }
    for (double& ci : c) ci /= static_cast<double>(n_);
    return c;
  }

  void replace_worst(const Point& x, double fx) {
    vertices_[n_] = x;
    values_[n_] = fx;
  }

  void shrink() {
    for (std::size_t v = 1; v <= n_; ++v) {
      vertices_[v] = affine(vertices_[0], vertices_[0], vertices_[v], opt_.shrink);
      values_[v] = f_(vertices_[v]);
    }
  }

  // Stable sort keeps earlier vertices ahead on ties.
  void order() {
    std::vector<std::size_t> idx(n_ + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values_[a] < values_[b]; });
    std::vector<Point> v(n_ + 1);
    std::vector<double> fv(n_ + 1);
    for (std::size_t k = 0; k <= n_; ++k) {
      v[k] = std::move(vertices_[idx[k]]);
      fv[k] = values_[idx[k]];
    }
    vertices_ = std::move(v);
    values_ = std::move(fv);
  }

  CountingObjective& f_;
  NelderMeadOptions opt_;
  std::size_t n_;
  Point start_;
  std::vector<Point> vertices_;
  std::vector<double> values_;
};

}  // namespace

OptimizerTrace minimize(const Objective& objective, std::span<const double> x0,
                        const Budget& budget, Method method, std::uint64_t seed,
                        const MinimizeOptions& options) {
  if (x0.empty()) throw ArgumentError("x0 must be non-empty");
  for (double v : x0) {
    if (!std::isfinite(v)) throw ArgumentError("x0 must be finite");
  }

  OptimizerTrace trace;
  trace.best_params.assign(x0.begin(), x0.end());
  CountingObjective f(objective);
  const std::size_t maxiter = budget.maxiter();

  try {
    if (method == Method::NelderMead) {
      NelderMead nm(f, x0, options.nelder_mead);
      for (std::size_t k = 0; k < maxiter; ++k) {
        nm.iterate();
        ++trace.iterations;
        trace.best_params = nm.best();
        trace.best_value = nm.best_value();
        trace.objective_history.push_back(trace.best_value);
      }
    } else {
      // Each iteration evaluates the current iterate and one perturbation
      // pair, then steps; the final step's iterate is returned only if a
      // later iteration evaluated it.
      const SpsaOptions& o = options.spsa;
      Rng rng(seed);
      Point x(x0.begin(), x0.end());
      Point plus(x.size());
      Point minus(x.size());
      Point delta(x.size());
      for (std::size_t k = 0; k < maxiter; ++k) {
        const double fx = f(x);
        if (k == 0 || fx < trace.best_value) {
          trace.best_value = fx;
          trace.best_params = x;
        }
        const double kk = static_cast<double>(k + 1);
        const double ak = o.a / std::pow(kk + o.stability, o.alpha);
        const double ck = o.c / std::pow(kk, o.gamma);
        for (std::size_t i = 0; i < x.size(); ++i) {
          delta[i] = rademacher(rng);
          plus[i] = x[i] + ck * delta[i];
          minus[i] = x[i] - ck * delta[i];
        }
        const double diff = (f(plus) - f(minus)) / (2.0 * ck);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= ak * diff * delta[i];
        ++trace.iterations;
        trace.objective_history.push_back(trace.best_value);
      }
    }
  } catch (const NonFiniteObjective&) {
    trace.status = TraceStatus::Aborted;
    trace.diagnostic = "objective returned a non-finite value at evaluation " +
                       std::to_string(f.evals()) + " (iteration " +
                       std::to_string(trace.iterations + 1) + ")";
  }
  trace.evals_used = f.evals();
  return trace;
}

void RegulationStrategy::validate() const {
  if (kind == RegulationKind::Incremental && step < 1) {
    throw ArgumentError("incremental step must be >= 1");
  }
  if (kind == RegulationKind::DynamicWeighted && !(beta > 0.0 && beta <= 1.0)) {
    throw ArgumentError("dynamic-weighted beta must be in (0, 1]");
  }
}

std::size_t round_half_up(double value) {
  const double r = std::floor(value + 0.5);
  return r <= 0.0 ? 0 : static_cast<std::size_t>(r);
}

std::size_t regulate(const RegulationStrategy& strategy, std::size_t maxiter, double loss_dev,
                     double loss_ref, std::size_t cap) {
  strategy.validate();
  if (!(loss_ref > 0.0) || !std::isfinite(loss_ref)) {
    throw ArgumentError("reference loss must be positive and finite");
  }
  if (!std::isfinite(loss_dev) || loss_dev < 0.0) {
    throw ArgumentError("device loss must be finite and non-negative");
  }
  if (maxiter < 1) throw ArgumentError("maxiter must be >= 1");
  if (cap < 1) throw ArgumentError("cap must be >= 1");

  const double m = static_cast<double>(maxiter);
  const double r = loss_dev / loss_ref;
  double next = m;
  switch (strategy.kind) {
    case RegulationKind::Adaptive:
      next = m * r;
      break;
    case RegulationKind::Incremental:
      next = m + static_cast<double>(strategy.step);
      break;
    case RegulationKind::Logarithmic:
      next = m * (1.0 + std::log(r));
      break;
    case RegulationKind::DynamicWeighted:
      next = (1.0 - strategy.beta) * m + strategy.beta * m * r;
      break;
  }
  const double capped = std::min(next, static_cast<double>(cap));
  return std::clamp<std::size_t>(round_half_up(capped), 1, cap);
}

}  // namespace qfl::dfo
