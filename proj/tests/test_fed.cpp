#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qfl/error.hpp"
#include "qfl/fed.hpp"
#include "qfl/records.hpp"

using namespace qfl;
using namespace qfl::fed;

namespace {

FedConfig small_config(Mode mode) {
  FedConfig cfg;
  cfg.mode = mode;
  cfg.num_devices = 3;
  cfg.rounds = 3;
  cfg.init_maxiter = 4;
  cfg.cap = 20;
  cfg.data.samples_per_device = 16;
  cfg.data.server_samples = 12;
  cfg.data.seq_length = 80;
  cfg.ref_train.epochs = 50;
  cfg.seed = 3;
  return cfg;
}

DeviceState replay_device(std::vector<double> ref, double last_loss) {
  DeviceState dev;
  dev.id = 0;
  dev.train.features = Matrix::Constant(4, 4, 0.5);
  dev.train.labels = {0, 1, 0, 1};
  dev.test = dev.train;
  dev.maxiter = dfo::Budget(10, 100);
  dev.loss_history = {last_loss};
  dev.ref_provider = refmodel::RefLossProvider::replay({0, std::move(ref), std::nullopt});
  fine_tune_device(dev);
  return dev;
}

EncodedDataset probe_set(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 3.0);
  EncodedDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), 4);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
    for (Eigen::Index j = 0; j < 4; ++j) ds.features(i, j) = u(rng);
  ds.labels.assign(n, 0);
  return ds;
}

}  // namespace

TEST(Fed, RegulationGuard) {
  FedConfig cfg;
  cfg.model = qmodels::QModel::vqc(4);
  const std::vector<double> global(8, 0.1);
  auto first = local_train(replay_device({0.4, 0.4}, 0.8), global, 1, cfg);
  EXPECT_EQ(first.last.maxiter_used, 10U);
  EXPECT_FALSE(first.last.regulated);
  auto second = local_train(replay_device({0.4, 0.4}, 0.8), global, 2, cfg);
  EXPECT_EQ(second.last.maxiter_used, 20U);
  EXPECT_TRUE(second.last.regulated);
  auto above = local_train(replay_device({0.9, 0.9}, 0.8), global, 2, cfg);
  EXPECT_EQ(above.last.maxiter_used, 10U);
  cfg.mode = Mode::Baseline;
  auto base = local_train(replay_device({0.4, 0.4}, 0.8), global, 2, cfg);
  EXPECT_EQ(base.last.maxiter_used, 10U);
}

TEST(Fed, DistillEndpoints) {
  std::mt19937_64 rng(1);
  const auto model = qmodels::QModel::vqc(4);
  const auto probe = probe_set(rng, 8);
  const std::vector<double> local = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const std::vector<double> global = {1.1, -0.2, 0.3, 0.9, 0.5, 0.0, 0.7, 0.1};
  EXPECT_EQ(distill_step(local, global, probe, 0.0, model).params, local);
  const auto same = distill_step(local, local, probe, 5.0, model);
  EXPECT_EQ(same.params, local);
  EXPECT_DOUBLE_EQ(same.kappa, 0.0);
  const double kappa = distill_step(local, global, probe, 1.0, model).kappa;
  ASSERT_GT(kappa, 0.0);
  const auto full = distill_step(local, global, probe, 1.0 / kappa, model);
  for (std::size_t i = 0; i < local.size(); ++i) EXPECT_NEAR(full.params[i], global[i], 1e-15);
  EXPECT_THROW(distill_step(local, global, probe, -1.0, model), ArgumentError);
  EXPECT_THROW(distill_step(local, global, EncodedDataset{}, 1.0, model), ArgumentError);
}

TEST(Fed, SelectClients) {
  const std::vector<Candidate> c = {{0, 0.9}, {1, 0.5}, {2, 0.45}, {3, 0.3}, {4, 0.7}};
  EXPECT_EQ(select_clients(c, 0.5, 0.4), (std::vector<int>{1, 2}));
  EXPECT_EQ(select_clients(c, 0.5, 1.0), (std::vector<int>{0, 1, 2, 3, 4}));
  const std::vector<Candidate> tie = {{3, 0.6}, {1, 0.4}, {2, 0.9}};
  EXPECT_EQ(select_clients(tie, 0.5, 0.34), (std::vector<int>{1}));
  EXPECT_EQ(selection_count(0.01, 5), 1U);
  EXPECT_EQ(selection_count(0.5, 5), 3U);
  EXPECT_THROW(select_clients(std::vector<Candidate>{}, 0.5, 1.0), ArgumentError);
}

TEST(Fed, Aggregate) {
  const std::vector<double> a = {1, 3}, b = {3, 5};
  std::vector<Participant> two = {{0, a, 0.5}, {1, b, 0.5}};
  EXPECT_EQ(aggregate(two, AggregationMode::WeightedMean), (std::vector<double>{2, 4}));
  std::vector<Participant> one = {{4, b, 0.1}};
  EXPECT_EQ(aggregate(one, AggregationMode::WeightedMean), b);
  std::vector<Participant> skew = {{0, a, 0.2}, {1, b, 0.3}};
  const auto w = aggregate(skew, AggregationMode::WeightedMean);
  EXPECT_NEAR(w[0], 0.4 * 1 + 0.6 * 3, 1e-15);
  EXPECT_NEAR(w[1], 0.4 * 3 + 0.6 * 5, 1e-15);
  const auto plain = aggregate(skew, AggregationMode::SelectedMean);
  EXPECT_DOUBLE_EQ(plain[0], 2.0);
  std::vector<Participant> reversed = {{1, b, 0.3}, {0, a, 0.2}};
  EXPECT_EQ(aggregate(reversed, AggregationMode::WeightedMean), w);
  EXPECT_THROW(aggregate(std::vector<Participant>{}, AggregationMode::WeightedMean), ArgumentError);
}

TEST(Fed, Termination) {
  const std::vector<double> flat = {0.50, 0.499};
  const auto stop = check_termination(flat, 2, 0.01, 10);
  EXPECT_TRUE(stop.stop);
  EXPECT_EQ(stop.reason, StopReason::Converged);
  EXPECT_NEAR(stop.relative_change, 0.001 / 0.499, 1e-12);
  const std::vector<double> moving = {0.50, 0.40};
  EXPECT_FALSE(check_termination(moving, 2, 0.01, 10).stop);
  const auto cap = check_termination(moving, 10, 0.01, 10);
  EXPECT_TRUE(cap.stop);
  EXPECT_EQ(cap.reason, StopReason::MaxRounds);
  const std::vector<double> one = {0.5};
  EXPECT_FALSE(check_termination(one, 1, 0.5, 10).stop);
  EXPECT_TRUE(check_termination(one, 1, 0.5, 1).stop);
}

TEST(Fed, BaselineKeepsMaxiterConstant) {
  const auto r = run_experiment(small_config(Mode::Baseline));
  ASSERT_EQ(r.records.size(), 3U);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.selected.size(), 3U);
    for (const auto& d : rec.devices) {
      EXPECT_EQ(d.stats.maxiter_used, 4U);
      EXPECT_FALSE(d.stats.regulated);
    }
  }
  EXPECT_EQ(r.records.back().reason, StopReason::MaxRounds);
}

TEST(Fed, RegulationOnlyAfterFirstRound) {
  const auto r = run_experiment(small_config(Mode::LlmQfl));
  for (const auto& d : r.records.front().devices) EXPECT_EQ(d.stats.maxiter_used, 4U);
  for (std::size_t t = 1; t < r.records.size(); ++t) {
    for (std::size_t i = 0; i < r.records[t].devices.size(); ++i) {
      const auto& now = r.records[t].devices[i].stats;
      const auto& before = r.records[t - 1].devices[i].stats;
      EXPECT_LE(now.maxiter_used, 20U);
      if (!now.regulated) EXPECT_EQ(now.maxiter_used, before.maxiter_used);
      if (now.regulated) EXPECT_LT(now.ref_loss, before.loss);
    }
  }
}

TEST(Fed, SingleRoundAndDeterminism) {
  auto cfg = small_config(Mode::LlmQfl);
  cfg.rounds = 1;
  EXPECT_EQ(run_experiment(cfg).records.size(), 1U);
  cfg.rounds = 2;
  cfg.lambda = 0.5;
  cfg.selection_fraction = 0.6;
  std::string a, b;
  for (const auto& rec : run_experiment(cfg).records) a += records::to_jsonl_line(rec) + "\n";
  for (const auto& rec : run_experiment(cfg).records) b += records::to_jsonl_line(rec) + "\n";
  EXPECT_EQ(a, b);
}

TEST(Fed, SinkSeesEveryRound) {
  std::size_t seen = 0;
  const auto r = run_experiment(small_config(Mode::Baseline),
                                [&](const RoundRecord& rec) { EXPECT_EQ(rec.round, ++seen); });
  EXPECT_EQ(seen, r.records.size());
}

TEST(Fed, ConfigValidation) {
  auto cfg = small_config(Mode::LlmQfl);
  cfg.selection_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config(Mode::LlmQfl);
  cfg.init_maxiter = 50;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config(Mode::LlmQfl);
  cfg.num_devices = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  auto base = small_config(Mode::Baseline);
  base.selection_fraction = 0.2;
  base.lambda = 3.0;
  base.epsilon = 0.1;
  const auto eff = base.effective();
  EXPECT_EQ(eff.selection_fraction, 1.0);
  EXPECT_EQ(eff.lambda, 0.0);
  EXPECT_EQ(eff.epsilon, 0.0);
}

TEST(Fed, WeightsFollowShardSizes) {
  std::vector<DeviceState> devs(2);
  devs[0].train.labels.assign(30, 0);
  devs[0].train.features = Matrix::Zero(30, 1);
  devs[1].train.labels.assign(10, 0);
  devs[1].train.features = Matrix::Zero(10, 1);
  assign_weights(devs);
  EXPECT_DOUBLE_EQ(devs[0].weight, 0.75);
  EXPECT_DOUBLE_EQ(devs[1].weight, 0.25);
}
