#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qfl/error.hpp"
#include "qfl/qmodels.hpp"
#include "support/oracles.hpp"

using namespace qfl;
using namespace qfl::qmodels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

EncodedDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  EncodedDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) ds.features(i, j) = u(rng);
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<ClassId>(i % 2));
  return ds;
}

// Cross-entropy recomputed through the dense oracle, one row at a time.
double oracle_loss(const QModel& m, const EncodedDataset& ds, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = build_circuit(ds.row(i), w, m);
    const auto amps = oracle::state(c);
    std::vector<double> probs(static_cast<std::size_t>(amps.size()));
    for (Eigen::Index k = 0; k < amps.size(); ++k) probs[static_cast<std::size_t>(k)] = std::norm(amps[k]);
    const double p1 = oracle::parity_one_mass(probs, m.num_qubits(),
                                              m.interpreter == Interpreter::LastQubit);
    const double p = ds.labels[i] == 1 ? p1 : 1.0 - p1;
    total -= std::log(std::max(p, 1e-12));
  }
  return total / static_cast<double>(ds.size());
}

}  // namespace

TEST(QModels, RealAmplitudesWeightCount) {
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t reps = 0; reps <= 4; ++reps) {
      EXPECT_EQ((AnsatzSpec{AnsatzKind::RealAmplitudes, n, reps}.num_weights()), n * (reps + 1));
    }
  }
  EXPECT_EQ(QModel::vqc(4).num_weights(), 8U);
}

TEST(QModels, VqcCircuitHasEightRySlots) {
  const std::vector<double> x(4, 0.5), w(8, 0.1);
  const auto c = build_vqc(x, w, QModel::vqc(4));
  std::size_t ry = 0;
  for (const auto& op : c.ops()) ry += op.kind == qsim::GateKind::RY;
  EXPECT_EQ(ry, 8U);
}

TEST(QModels, ZeroFeaturesGivePairwiseAngle) {
  qsim::QuantumCircuit c(4);
  const std::vector<double> x(4, 0.0);
  append_zz_feature_map(c, x, 1);
  std::size_t pairwise = 0;
  for (const auto& op : c.ops()) {
    if (op.kind != qsim::GateKind::P) continue;
    if (std::abs(op.params[0]) < 1e-15) continue;
    ++pairwise;
    EXPECT_NEAR(op.params[0], 2.0 * std::numbers::pi * std::numbers::pi, 1e-12);
  }
  EXPECT_EQ(pairwise, 6U);
}

TEST(QModels, CircuitsMatchOracle) {
  std::mt19937_64 rng(2);
  for (const auto& m : {QModel::vqc(4, 2, 2), QModel::qcnn(4), QModel::qcnn(2)}) {
    const auto x = random_vec(rng, m.num_qubits(), 0.0, std::numbers::pi);
    const auto w = random_vec(rng, m.num_weights(), -3.0, 3.0);
    const auto c = build_circuit(x, w, m);
    EXPECT_LT(oracle::max_deviation(qsim::run(c), oracle::state(c)), 1e-10);
  }
}

TEST(QModels, QcnnStages) {
  const auto four = qcnn_active_sets(4);
  ASSERT_EQ(four.size(), 3U);
  EXPECT_EQ(four.back(), std::vector<std::size_t>{3});
  EXPECT_EQ(four[1], (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(qcnn_active_sets(2).size(), 2U);
  EXPECT_THROW(qcnn_active_sets(3), ArgumentError);
  EXPECT_EQ(QModel::qcnn(4).num_weights(), 22U);
  const std::vector<double> x(4, 0.1), w(21, 0.0);
  EXPECT_THROW(build_qcnn(x, w, QModel::qcnn(4)), ArgumentError);
}

TEST(QModels, Interpreters) {
  EXPECT_EQ(interpret("1110", Interpreter::ParityOfAllBits), 1);
  EXPECT_EQ(interpret("1110", Interpreter::LastQubit), 0);
  EXPECT_EQ(interpret(qsim::basis_index("0001"), 4, Interpreter::LastQubit), 1);
  qsim::SampleResult r;
  r.counts = {{"00", 50}, {"11", 50}};
  r.shots = 100;
  const auto p = class_probabilities(r, Interpreter::ParityOfAllBits);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
}

TEST(QModels, ParityMatchesEnumeration) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    auto probs = random_vec(rng, 16, 0.0, 1.0);
    double s = 0.0;
    for (double v : probs) s += v;
    for (double& v : probs) v /= s;
    for (auto interp : {Interpreter::ParityOfAllBits, Interpreter::LastQubit}) {
      const auto p = class_probabilities(probs, 4, interp);
      EXPECT_NEAR(p[1], oracle::parity_one_mass(probs, 4, interp == Interpreter::LastQubit), 1e-14);
    }
  }
}

TEST(QModels, ForwardNormalized) {
  std::mt19937_64 rng(4);
  auto m = QModel::vqc(4);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_vec(rng, 4, 0.0, std::numbers::pi);
    const auto w = random_vec(rng, 8, -3.0, 3.0);
    const auto p = forward(m, x, w);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);
  }
  m.shots = 10;
  const auto x = random_vec(rng, 4, 0.0, std::numbers::pi);
  const auto w = random_vec(rng, 8, -3.0, 3.0);
  const auto p = forward(m, x, w, {0.0, 1});
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);
}

TEST(QModels, LossMatchesIndependentRecomputation) {
  std::mt19937_64 rng(6);
  for (const auto& m : {QModel::vqc(4), QModel::vqc(4, 2, 3), QModel::qcnn(4)}) {
    const auto ds = random_dataset(rng, 12, 4);
    const auto w = random_vec(rng, m.num_weights(), -3.0, 3.0);
    EXPECT_NEAR(loss(m, ds, w), oracle_loss(m, ds, w), 1e-10);
  }
}

TEST(QModels, UniformPredictorLossIsLn2) {
  // One qubit at x = 0: the map leaves |+>, and RY(0) keeps it there.
  const QModel m = QModel::vqc(1, 1, 1);
  EncodedDataset ds;
  ds.features = Matrix::Zero(4, 1);
  ds.labels = {0, 1, 0, 1};
  const std::vector<double> w = {0.0, 0.0};
  EXPECT_NEAR(loss(m, ds, w), std::log(2.0), 1e-12);
}

TEST(QModels, PerfectPredictionLossIsZero) {
  // RY(pi/2)|+> = |1>, so every label-1 row gets probability 1.
  QModel m = QModel::vqc(1, 1, 1);
  EncodedDataset ds;
  ds.features = Matrix::Zero(3, 1);
  ds.labels = {1, 1, 1};
  const std::vector<double> w = {std::numbers::pi / 2.0, 0.0};
  EXPECT_NEAR(loss(m, ds, w), 0.0, 1e-12);
}

TEST(QModels, ShotLossIsSeeded) {
  auto m = QModel::qcnn(4);
  m.shots = 10;
  std::mt19937_64 rng(7);
  const auto ds = random_dataset(rng, 8, 4);
  const auto w = random_vec(rng, 22, -3.0, 3.0);
  EXPECT_EQ(loss(m, ds, w, {0.0, 5}), loss(m, ds, w, {0.0, 5}));
  EXPECT_EQ(loss(m, ds, w, {0.1, 5}), loss(m, ds, w, {0.1, 5}));
  m.shots = 0;
  EXPECT_THROW(loss(m, ds, w, {0.1, 5}), ArgumentError);
}

TEST(QModels, LossRejectsBadInput) {
  const auto m = QModel::vqc(4);
  EncodedDataset empty;
  empty.features.resize(0, 4);
  const std::vector<double> w(8, 0.0);
  EXPECT_THROW(loss(m, empty, w), ArgumentError);
  EncodedDataset bad;
  bad.features = Matrix::Zero(1, 4);
  bad.labels = {2};
  EXPECT_THROW(loss(m, bad, w), ArgumentError);
}
