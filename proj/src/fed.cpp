#include "qfl/fed.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "qfl/dataprep.hpp"
#include "qfl/error.hpp"
#include "qfl/random.hpp"

namespace qfl::fed {

namespace {

// Stream tags for derive_seed.
enum SeedStream : std::uint64_t {
  kDataStream = 1,
  kSplitStream = 2,
  kInitStream = 3,
  kOptimizerStream = 4,
  kShotStream = 5,
  kRefStream = 6,
  kServerShotStream = 7,
};

qsim::NoiseSpec device_noise(const FedConfig& cfg, int id) {
  return {cfg.depolarizing_prob, derive_seed(cfg.seed, kShotStream, static_cast<std::uint64_t>(id))};
}

qsim::NoiseSpec server_noise(const FedConfig& cfg) {
  return {cfg.depolarizing_prob, derive_seed(cfg.seed, kServerShotStream)};
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; every index is
// handled exactly once and results land in caller-owned slots.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

EncodedDataset probe_of(const EncodedDataset& train, std::size_t probe_size) {
  return train.slice(0, std::min(probe_size, train.size()));
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::Baseline ? "baseline" : "llmqfl"; }

const char* to_string(AggregationMode mode) {
  return mode == AggregationMode::WeightedMean ? "weighted_mean" : "selected_mean";
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::None: return "none";
    case StopReason::Converged: return "converged";
    case StopReason::MaxRounds: return "max_rounds";
  }
  return "?";
}

void FedConfig::validate() const {
  auto require = [](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(num_devices >= 1, "fed.num_devices", "must be >= 1");
  require(rounds >= 1, "fed.rounds", "must be >= 1");
  require(cap >= 1, "fed.cap", "must be >= 1");
  require(init_maxiter >= 1 && init_maxiter <= cap, "fed.init_maxiter", "must be in [1, cap]");
  require(selection_fraction > 0.0 && selection_fraction <= 1.0, "fed.selection_fraction",
          "must be in (0, 1]");
  require(selection_fraction * static_cast<double>(num_devices) >= 0.5,
          "fed.selection_fraction", "k * N must round to at least one device");
  require(epsilon >= 0.0 && std::isfinite(epsilon), "fed.epsilon", "must be >= 0");
  require(lambda >= 0.0 && std::isfinite(lambda), "fed.lambda", "must be >= 0");
  require(probe_size >= 1, "fed.probe_size", "must be >= 1");
  require(regularization_mu >= 0.0, "fed.regularization_mu", "must be >= 0");
  require(init_scale >= 0.0 && std::isfinite(init_scale), "fed.init_scale", "must be >= 0");
  require(depolarizing_prob >= 0.0 && depolarizing_prob < 1.0, "model.depolarizing_prob",
          "must be in [0, 1)");
  require(!(depolarizing_prob > 0.0 && model.shots == 0), "model.depolarizing_prob",
          "noise requires model.shots >= 1");
  require(strategy.kind != dfo::RegulationKind::Incremental || strategy.step >= 1,
          "strategy.step", "must be >= 1");
  require(strategy.kind != dfo::RegulationKind::DynamicWeighted ||
              (strategy.beta > 0.0 && strategy.beta <= 1.0),
          "strategy.beta", "must be in (0, 1]");
  try {
    model.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("model", e.what());
  }
  require(ref_train.epochs >= 1, "ref.epochs", "must be >= 1");
  require(ref_train.learning_rate > 0.0, "ref.learning_rate", "must be > 0");
  require(ref_kind != RefKind::Replay || !replay_path.empty(), "ref.replay_path",
          "required when ref.kind = replay");
  require(data.source != DataSource::Csv || !data.csv_path.empty(), "data.csv_path",
          "required when data.source = csv");
  require(data.samples_per_device >= 2, "data.samples_per_device", "must be >= 2");
  require(data.server_samples >= 1, "data.server_samples", "must be >= 1");
  require(data.test_fraction > 0.0 && data.test_fraction < 1.0, "data.test_fraction",
          "must be in (0, 1)");
  require(data.scale_hi > data.scale_lo, "data.scale_hi", "must exceed data.scale_lo");
  require(data.motif_noise >= 0.0 && data.motif_noise <= 1.0, "data.motif_noise",
          "must be a probability");
  require(data.motif0.size() < data.seq_length && data.motif1.size() < data.seq_length,
          "data.seq_length", "must exceed both motif lengths");
}

FedConfig FedConfig::effective() const {
  FedConfig out = *this;
  if (mode == Mode::Baseline) {
    out.selection_fraction = 1.0;
    out.lambda = 0.0;
    out.epsilon = 0.0;
  }
  return out;
}

std::size_t selection_count(double fraction, std::size_t n) {
  if (n == 0) return 0;
  const std::size_t k = dfo::round_half_up(fraction * static_cast<double>(n));
  return std::clamp<std::size_t>(k, 1, n);
}

void assign_weights(std::vector<DeviceState>& devices) {
  double total = 0.0;
  for (const auto& d : devices) total += static_cast<double>(d.train.size());
  if (total <= 0.0) throw ArgumentError("devices hold no training data");
  for (auto& d : devices) d.weight = static_cast<double>(d.train.size()) / total;
}

refmodel::FineTuneMetrics fine_tune_device(DeviceState& dev) {
  if (dev.ref_provider.fine_tuned()) {
    throw std::logic_error("device " + std::to_string(dev.id) +
                           ": reference model is fine-tuned only in round 1");
  }
  return dev.ref_provider.fine_tune(dev.train);
}

DeviceState local_train(DeviceState dev, std::span<const double> global, std::size_t round,
                        const FedConfig& cfg) {
  if (round < 1) throw ArgumentError("rounds are 1-based");
  if (global.size() != cfg.model.num_weights()) {
    throw ArgumentError("global parameter count does not match the model");
  }
  DeviceRoundStats stats;
  stats.ref_loss = dev.ref_provider.eval_loss(dev.test, round);

  if (round > 1 && cfg.regulation_enabled() && !dev.loss_history.empty() &&
      stats.ref_loss < dev.loss_history.back()) {
    const std::size_t next = dfo::regulate(cfg.strategy, dev.maxiter.maxiter(),
                                           dev.loss_history.back(), stats.ref_loss, cfg.cap);
    dev.maxiter = dfo::Budget(next, cfg.cap);
    stats.regulated = true;
  }
  stats.maxiter_used = dev.maxiter.maxiter();

  const qsim::NoiseSpec noise = device_noise(cfg, dev.id);
  const std::vector<double> anchor(global.begin(), global.end());
  auto objective = [&](std::span<const double> theta) {
    double value = qmodels::loss(cfg.model, dev.train, theta, noise);
    if (cfg.regularization_mu > 0.0) {
      double sq = 0.0;
      for (std::size_t i = 0; i < theta.size(); ++i) sq += (theta[i] - anchor[i]) * (theta[i] - anchor[i]);
      value += cfg.regularization_mu * sq;
    }
    return value;
  };

  const std::uint64_t seed =
      derive_seed(cfg.seed, kOptimizerStream, round, static_cast<std::uint64_t>(dev.id));
  const auto trace = dfo::minimize(objective, global, dev.maxiter, cfg.method, seed, cfg.optimizer);
  stats.evals = trace.evals_used;
  stats.objective_history = trace.objective_history;

  if (trace.aborted()) {
    stats.failed = true;
    stats.diagnostic = trace.diagnostic;
    stats.loss = std::numeric_limits<double>::quiet_NaN();
    dev.params = anchor;
  } else {
    dev.params = trace.best_params;
    stats.loss = cfg.regularization_mu > 0.0
                     ? qmodels::loss(cfg.model, dev.train, dev.params, noise)
                     : trace.best_value;
    dev.loss_history.push_back(stats.loss);
  }
  dev.last = std::move(stats);
  return dev;
}

DistillResult distill_step(std::span<const double> local, std::span<const double> global,
                           const EncodedDataset& probe, double lambda,
                           const qmodels::QModel& model, const qsim::NoiseSpec& noise) {
  if (local.size() != global.size()) throw ArgumentError("parameter length mismatch");
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  if (probe.empty()) throw ArgumentError("distillation probe must be non-empty");

  DistillResult out;
  out.params.assign(local.begin(), local.end());
  if (lambda == 0.0) return out;

  double kappa = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const qsim::NoiseSpec row_noise{noise.depolarizing_prob, derive_seed(noise.seed, i)};
    const auto p_global = qmodels::forward(model, probe.row(i), global, row_noise);
    const auto p_local = qmodels::forward(model, probe.row(i), local, row_noise);
    kappa += refmodel::kl_divergence(p_global, p_local);
  }
  kappa /= static_cast<double>(probe.size());
  if (!std::isfinite(kappa)) {
    std::cerr << "warning: non-finite distillation divergence; skipping pull\n";
    out.skipped = true;
    return out;
  }
  out.kappa = kappa;
  const double pull = std::clamp(lambda * kappa, 0.0, 1.0);
  if (pull == 1.0) {
    out.params.assign(global.begin(), global.end());
    return out;
  }
  for (std::size_t i = 0; i < local.size(); ++i) {
    out.params[i] = local[i] + pull * (global[i] - local[i]);
  }
  return out;
}

std::vector<int> select_clients(std::span<const Candidate> candidates, double global_loss,
                                double fraction) {
  if (candidates.empty()) throw ArgumentError("selection needs at least one candidate");
  std::vector<Candidate> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end(), [&](const Candidate& a, const Candidate& b) {
    const double da = std::abs(a.loss - global_loss);
    const double db = std::abs(b.loss - global_loss);
    if (da != db) return da < db;
    return a.id < b.id;
  });
  const std::size_t k = selection_count(fraction, sorted.size());
  std::vector<int> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(sorted[i].id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> aggregate(std::span<const Participant> participants, AggregationMode mode) {
  if (participants.empty()) throw ArgumentError("aggregation needs at least one participant");
  std::vector<const Participant*> ordered;
  ordered.reserve(participants.size());
  for (const auto& p : participants) ordered.push_back(&p);
  std::sort(ordered.begin(), ordered.end(),
            [](const Participant* a, const Participant* b) { return a->id < b->id; });

  const std::size_t dim = ordered.front()->params.size();
  double total_weight = 0.0;
  for (const auto* p : ordered) {
    if (p->params.size() != dim) throw ArgumentError("participants disagree on parameter count");
    total_weight += mode == AggregationMode::WeightedMean ? p->weight : 1.0;
  }
  if (!(total_weight > 0.0)) throw ArgumentError("participant weights sum to zero");
  if (ordered.size() == 1) return {ordered.front()->params.begin(), ordered.front()->params.end()};

  std::vector<double> out(dim, 0.0);
  for (const auto* p : ordered) {
    const double w = (mode == AggregationMode::WeightedMean ? p->weight : 1.0) / total_weight;
    for (std::size_t i = 0; i < dim; ++i) out[i] += w * p->params[i];
  }
  return out;
}

TerminationDecision check_termination(std::span<const double> history, std::size_t round,
                                      double epsilon, std::size_t max_rounds) {
  if (round < 1) throw ArgumentError("rounds are 1-based");
  TerminationDecision d;
  if (round >= 2 && history.size() >= 2) {
    const double current = history[history.size() - 1];
    const double previous = history[history.size() - 2];
    d.relative_change = std::abs(current - previous) / current;
    if (d.relative_change < epsilon) {
      d.stop = true;
      d.reason = StopReason::Converged;
      return d;
    }
  }
  if (round >= max_rounds) {
    d.stop = true;
    d.reason = StopReason::MaxRounds;
  }
  return d;
}

std::size_t RoundRecord::total_evals() const {
  std::size_t total = 0;
  for (const auto& d : devices) total += d.stats.evals;
  return total;
}

std::size_t RoundRecord::max_maxiter() const {
  std::size_t m = 0;
  for (const auto& d : devices) m = std::max(m, d.stats.maxiter_used);
  return m;
}

FederationData build_federation_data(const FedConfig& cfg) {
  const std::size_t n_dev = cfg.num_devices;
  const std::size_t n_q = cfg.model.num_qubits();

  EncodedDataset pool;
  std::size_t per_device = cfg.data.samples_per_device;
  std::size_t server = cfg.data.server_samples;
  if (cfg.data.source == DataSource::Synthetic) {
    dataprep::SynthGenomicOptions opt;
    opt.n = n_dev * per_device + server;
    opt.length = cfg.data.seq_length;
    opt.motif0 = cfg.data.motif0;
    opt.motif1 = cfg.data.motif1;
    opt.noise = cfg.data.motif_noise;
    opt.seed = derive_seed(cfg.seed, kDataStream);
    pool = dataprep::one_hot_dataset(dataprep::synth_genomic(opt));
  } else {
    auto content = dataprep::load_csv(cfg.data.csv_path);
    if (auto* seqs = std::get_if<std::vector<dataprep::NucleotideSequence>>(&content)) {
      if (seqs->empty()) throw ConfigError("data.csv_path", "CSV holds no rows");
      pool = dataprep::one_hot_dataset(*seqs);
    } else {
      pool = std::get<EncodedDataset>(std::move(content));
    }
    // Seeded shuffle, then carve out server rows and equal device shards.
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(cfg.seed, kDataStream));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    pool = pool.subset(idx);
    server = std::min(server, pool.size() / (n_dev + 1));
    per_device = (pool.size() - server) / n_dev;
    if (per_device < 2 || server < 1) {
      throw ConfigError("data.csv_path", "too few rows for " + std::to_string(n_dev) + " devices");
    }
  }

  const std::size_t device_rows = n_dev * per_device;
  EncodedDataset fit_rows = pool.slice(0, device_rows);

  Matrix encoded;
  if (pool.dim() == n_q) {
    encoded = pool.features;
  } else {
    const auto pca = dataprep::pca_fit(fit_rows.features, n_q);
    encoded = dataprep::pca_transform(pca, pool.features);
  }
  const auto scaler = dataprep::MinMaxScaler::fit(
      encoded.topRows(static_cast<Eigen::Index>(device_rows)), cfg.data.scale_lo, cfg.data.scale_hi);
  pool.features = scaler.transform(encoded);

  FederationData data;
  for (std::size_t d = 0; d < n_dev; ++d) {
    const auto shard = pool.slice(d * per_device, (d + 1) * per_device);
    const auto split = dataprep::train_test_split(shard.size(), cfg.data.test_fraction,
                                                  derive_seed(cfg.seed, kSplitStream, d));
    data.device_train.push_back(shard.subset(split.train));
    data.device_test.push_back(shard.subset(split.test));
  }
  data.server_validation = pool.slice(device_rows, device_rows + server);
  return data;
}

ExperimentResult run_experiment(const FedConfig& cfg_in, const RecordSink& sink) {
  const FedConfig cfg = cfg_in.effective();
  cfg.validate();
  return run_experiment(cfg, build_federation_data(cfg), sink);
}

ExperimentResult run_experiment(const FedConfig& cfg_in, const FederationData& data,
                                const RecordSink& sink) {
  const FedConfig cfg = cfg_in.effective();
  cfg.validate();
  if (data.device_train.size() != cfg.num_devices || data.device_test.size() != cfg.num_devices) {
    throw ArgumentError("federation data does not match the device count");
  }

  std::map<int, refmodel::ReplayRecord> replay;
  if (cfg.ref_kind == RefKind::Replay) {
    for (auto& rec : refmodel::load_replay(cfg.replay_path)) replay[rec.device_id] = rec;
  }

  std::vector<DeviceState> devices(cfg.num_devices);
  for (std::size_t i = 0; i < cfg.num_devices; ++i) {
    auto& dev = devices[i];
    dev.id = static_cast<int>(i);
    dev.train = data.device_train[i];
    dev.test = data.device_test[i];
    dev.maxiter = dfo::Budget(cfg.init_maxiter, cfg.cap);
    if (cfg.ref_kind == RefKind::Replay) {
      const auto it = replay.find(dev.id);
      if (it == replay.end()) {
        throw ConfigError("ref.replay_path", "no record for device " + std::to_string(dev.id));
      }
      dev.ref_provider = refmodel::RefLossProvider::replay(it->second);
    } else {
      refmodel::TrainConfig tc = cfg.ref_train;
      tc.seed = derive_seed(cfg.seed, kRefStream, i);
      dev.ref_provider = refmodel::RefLossProvider::classical(tc);
    }
  }
  assign_weights(devices);

  std::vector<double> global(cfg.model.num_weights());
  {
    Rng rng(derive_seed(cfg.seed, kInitStream));
    for (double& w : global) w = uniform(rng, -cfg.init_scale, cfg.init_scale);
  }

  ExperimentResult result;
  std::vector<double> selected_history;
  const auto server_shots = server_noise(cfg);

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    if (t == 1) {
      for (auto& dev : devices) fine_tune_device(dev);
    }

    const std::vector<double> broadcast = global;
    parallel_for(devices.size(), cfg.threads, [&](std::size_t i) {
      DeviceState next = local_train(std::move(devices[i]), broadcast, t, cfg);
      if (!next.last.failed && cfg.lambda > 0.0) {
        const auto probe = probe_of(next.train, cfg.probe_size);
        auto distilled = distill_step(next.params, broadcast, probe, cfg.lambda, cfg.model,
                                      device_noise(cfg, next.id));
        next.params = std::move(distilled.params);
        next.last.kappa = distilled.kappa;
      }
      devices[i] = std::move(next);
    });

    RoundRecord rec;
    rec.round = t;
    std::vector<Candidate> candidates;
    std::vector<Participant> everyone;
    for (const auto& dev : devices) {
      rec.devices.push_back({dev.id, dev.last});
      if (dev.last.failed) continue;
      candidates.push_back({dev.id, dev.last.loss});
      everyone.push_back({dev.id, dev.params, dev.weight});
    }
    if (candidates.empty()) {
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      result.records.push_back(rec);
      if (sink) sink(rec);
      result.status = RunStatus::Aborted;
      result.message = "every device failed in round " + std::to_string(t);
      result.global_params = global;
      return result;
    }

    const auto tentative = aggregate(everyone, cfg.aggregation);
    rec.global_loss = qmodels::loss(cfg.model, data.server_validation, tentative, server_shots);
    rec.selected = select_clients(candidates, rec.global_loss, cfg.selection_fraction);

    std::vector<Participant> chosen;
    double selected_sum = 0.0;
    for (int id : rec.selected) {
      const auto& dev = devices[static_cast<std::size_t>(id)];
      chosen.push_back({dev.id, dev.params, dev.weight});
      selected_sum += dev.last.loss;
    }
    global = aggregate(chosen, cfg.aggregation);
    rec.selected_loss = selected_sum / static_cast<double>(rec.selected.size());
    rec.global_params = global;

    for (const auto& dev : devices) {
      rec.global_train_loss += dev.weight * qmodels::loss(cfg.model, dev.train, global,
                                                          device_noise(cfg, dev.id));
    }
    rec.global_val_loss = qmodels::loss(cfg.model, data.server_validation, global, server_shots);

    selected_history.push_back(rec.selected_loss);
    const auto decision = check_termination(selected_history, t, cfg.epsilon, cfg.rounds);
    rec.terminated = decision.stop;
    rec.reason = decision.reason;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.records.push_back(rec);
    if (sink) sink(rec);
    if (decision.stop) break;
  }
  result.global_params = global;
  return result;
}

}  // namespace qfl::fed
