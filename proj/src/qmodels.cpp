#include "qfl/qmodels.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "qfl/error.hpp"
#include "qfl/random.hpp"

namespace qfl::qmodels {

namespace {

using qsim::GateOp;
using qsim::QuantumCircuit;

constexpr std::size_t kConvBlockWeights = 4;
constexpr std::size_t kPoolBlockWeights = 2;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void require_lengths(std::span<const double> features, std::span<const double> weights,
                     const QModel& model) {
  model.validate();
  if (features.size() != model.feature_map.num_features) {
    throw ArgumentError("expected " + std::to_string(model.feature_map.num_features) +
                        " feature value(s), got " + std::to_string(features.size()));
  }
  if (weights.size() != model.num_weights()) {
    throw ArgumentError("expected " + std::to_string(model.num_weights()) +
                        " weight value(s), got " + std::to_string(weights.size()));
  }
}

// RY a|RY b, CX, RY c|RY d
void append_conv_block(QuantumCircuit& c, std::size_t q0, std::size_t q1, const double* w) {
  c.append(GateOp::ry(q0, w[0]));
  c.append(GateOp::ry(q1, w[1]));
  c.append(GateOp::cx(q0, q1));
  c.append(GateOp::ry(q0, w[2]));
  c.append(GateOp::ry(q1, w[3]));
}

// Entangles the discarded source into the kept sink.
void append_pool_block(QuantumCircuit& c, std::size_t source, std::size_t sink,
                       const double* w) {
  c.append(GateOp::ry(source, w[0]));
  c.append(GateOp::cx(source, sink));
  c.append(GateOp::ry(sink, w[1]));
}

}  // namespace

std::size_t AnsatzSpec::num_weights() const {
  switch (kind) {
    case AnsatzKind::RealAmplitudes:
      return num_qubits * (reps + 1);
    case AnsatzKind::QcnnStack: {
      if (!is_power_of_two(num_qubits) || num_qubits < 2) return 0;
      std::size_t total = 0;
      for (std::size_t m = num_qubits; m > 1; m /= 2) {
        total += reps * (m - 1) * kConvBlockWeights + (m / 2) * kPoolBlockWeights;
      }
      return total;
    }
  }
  return 0;
}

void QModel::validate() const {
  if (num_classes != kNumClasses) throw ArgumentError("only binary classification is supported");
  if (feature_map.reps < 1) throw ArgumentError("feature map reps must be >= 1");
  if (ansatz.reps < 1) throw ArgumentError("ansatz reps must be >= 1");
  if (ansatz.num_qubits < 1 || ansatz.num_qubits > qsim::kMaxQubits) {
    throw ArgumentError("qubit count must be in 1..=10");
  }
  if (feature_map.num_features != ansatz.num_qubits) {
    throw ArgumentError("feature count " + std::to_string(feature_map.num_features) +
                        " does not match qubit count " + std::to_string(ansatz.num_qubits));
  }
  if (ansatz.kind == AnsatzKind::QcnnStack &&
      (!is_power_of_two(ansatz.num_qubits) || ansatz.num_qubits < 2)) {
    throw ArgumentError("QCNN qubit count must be a power of two >= 2, got " +
                        std::to_string(ansatz.num_qubits));
  }
}

QModel QModel::vqc(std::size_t num_qubits, std::size_t feature_reps, std::size_t ansatz_reps) {
  QModel m;
  m.feature_map = {FeatureMapKind::ZZ, num_qubits, feature_reps};
  m.ansatz = {AnsatzKind::RealAmplitudes, num_qubits, ansatz_reps};
  m.interpreter = Interpreter::ParityOfAllBits;
  return m;
}

QModel QModel::qcnn(std::size_t num_qubits, std::size_t feature_reps, std::size_t conv_reps) {
  QModel m;
  m.feature_map = {FeatureMapKind::ZZ, num_qubits, feature_reps};
  m.ansatz = {AnsatzKind::QcnnStack, num_qubits, conv_reps};
  m.interpreter = Interpreter::LastQubit;
  return m;
}

void append_zz_feature_map(QuantumCircuit& circuit, std::span<const double> features,
                           std::size_t reps) {
  const std::size_t n = circuit.num_qubits();
  if (features.size() != n) throw ArgumentError("feature count must equal qubit count");
  constexpr double pi = std::numbers::pi;
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t q = 0; q < n; ++q) circuit.append(GateOp::h(q));
    for (std::size_t q = 0; q < n; ++q) circuit.append(GateOp::p(q, 2.0 * features[q]));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        circuit.append(GateOp::cx(i, j));
        circuit.append(GateOp::p(j, 2.0 * (pi - features[i]) * (pi - features[j])));
        circuit.append(GateOp::cx(i, j));
      }
    }
  }
}

void append_real_amplitudes(QuantumCircuit& circuit, std::span<const double> weights,
                            std::size_t reps) {
  const std::size_t n = circuit.num_qubits();
  if (weights.size() != n * (reps + 1)) {
    throw ArgumentError("RealAmplitudes expects " + std::to_string(n * (reps + 1)) +
                        " weight(s), got " + std::to_string(weights.size()));
  }
  std::size_t w = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t q = 0; q < n; ++q) circuit.append(GateOp::ry(q, weights[w++]));
    if (n > 1) {
      for (std::size_t q = 0; q < n; ++q) circuit.append(GateOp::cx(q, (q + 1) % n));
    }
  }
  for (std::size_t q = 0; q < n; ++q) circuit.append(GateOp::ry(q, weights[w++]));
}

std::vector<std::vector<std::size_t>> qcnn_active_sets(std::size_t num_qubits) {
  if (!is_power_of_two(num_qubits) || num_qubits < 2) {
    throw ArgumentError("QCNN qubit count must be a power of two >= 2, got " +
                        std::to_string(num_qubits));
  }
  std::vector<std::vector<std::size_t>> sets;
  std::vector<std::size_t> active(num_qubits);
  for (std::size_t q = 0; q < num_qubits; ++q) active[q] = q;
  sets.push_back(active);
  while (active.size() > 1) {
    // Pool pairs the first half with the second half and keeps the second.
    active.erase(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(active.size() / 2));
    sets.push_back(active);
  }
  return sets;
}

namespace {

void append_qcnn_stack(QuantumCircuit& c, std::span<const double> weights, std::size_t reps) {
  const double* w = weights.data();
  const auto sets = qcnn_active_sets(c.num_qubits());
  for (std::size_t stage = 0; stage + 1 < sets.size(); ++stage) {
    const auto& active = sets[stage];
    const std::size_t m = active.size();
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t j = 0; j + 1 < m; ++j) {
        append_conv_block(c, active[j], active[j + 1], w);
        w += kConvBlockWeights;
      }
    }
    for (std::size_t j = 0; j < m / 2; ++j) {
      append_pool_block(c, active[j], active[j + m / 2], w);
      w += kPoolBlockWeights;
    }
  }
}

void append_ansatz(QuantumCircuit& c, std::span<const double> weights, const QModel& model) {
  if (model.ansatz.kind == AnsatzKind::QcnnStack) {
    append_qcnn_stack(c, weights, model.ansatz.reps);
  } else {
    append_real_amplitudes(c, weights, model.ansatz.reps);
  }
}

// Exact-mode evaluation over many samples with fixed weights: the ansatz does
// not depend on the sample, so it is built once and replayed on each state.
class ExactEvaluator {
 public:
  ExactEvaluator(const QModel& model, std::span<const double> weights)
      : model_(model), ansatz_(model.num_qubits()) {
    const std::vector<double> probe(model.feature_map.num_features, 0.0);
    require_lengths(probe, weights, model);
    append_ansatz(ansatz_, weights, model);
  }

  ClassProbabilities operator()(std::span<const double> features) const {
    if (features.size() != model_.feature_map.num_features) {
      throw ArgumentError("expected " + std::to_string(model_.feature_map.num_features) +
                          " feature value(s), got " + std::to_string(features.size()));
    }
    // Each feature-map rep is a Hadamard layer followed by a diagonal phase,
    // so the phases are applied in one pass instead of gate by gate.
    const std::size_t n = model_.num_qubits();
    const std::size_t dim = std::size_t{1} << n;
    constexpr double pi = std::numbers::pi;
    std::vector<qsim::Complex> diagonal(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      double phase = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool bi = (k >> (n - 1 - i)) & 1U;
        if (bi) phase += 2.0 * features[i];
        for (std::size_t j = i + 1; j < n; ++j) {
          const bool bj = (k >> (n - 1 - j)) & 1U;
          if (bi != bj) phase += 2.0 * (pi - features[i]) * (pi - features[j]);
        }
      }
      diagonal[k] = std::polar(1.0, phase);
    }
    qsim::Statevector state(n);
    for (std::size_t r = 0; r < model_.feature_map.reps; ++r) {
      for (std::size_t q = 0; q < n; ++q) state.apply(GateOp::h(q));
      state.apply_diagonal(diagonal);
    }
    for (const auto& op : ansatz_.ops()) state.apply(op);
    return class_probabilities(state.probabilities(), model_.num_qubits(), model_.interpreter);
  }

 private:
  const QModel& model_;
  QuantumCircuit ansatz_;
};

}  // namespace

QuantumCircuit build_vqc(std::span<const double> features, std::span<const double> weights,
                         const QModel& model) {
  require_lengths(features, weights, model);
  if (model.ansatz.kind != AnsatzKind::RealAmplitudes) {
    throw ArgumentError("build_vqc requires a RealAmplitudes ansatz");
  }
  QuantumCircuit c(model.num_qubits());
  append_zz_feature_map(c, features, model.feature_map.reps);
  append_real_amplitudes(c, weights, model.ansatz.reps);
  return c;
}

QuantumCircuit build_qcnn(std::span<const double> features, std::span<const double> weights,
                          const QModel& model) {
  require_lengths(features, weights, model);
  if (model.ansatz.kind != AnsatzKind::QcnnStack) {
    throw ArgumentError("build_qcnn requires a QCNN ansatz");
  }
  QuantumCircuit c(model.num_qubits());
  append_zz_feature_map(c, features, model.feature_map.reps);
  append_qcnn_stack(c, weights, model.ansatz.reps);
  return c;
}

QuantumCircuit build_circuit(std::span<const double> features, std::span<const double> weights,
                             const QModel& model) {
  return model.ansatz.kind == AnsatzKind::QcnnStack ? build_qcnn(features, weights, model)
                                                    : build_vqc(features, weights, model);
}

ClassId interpret(std::uint64_t basis_index, std::size_t /*num_qubits*/,
                  Interpreter interpreter) {
  if (interpreter == Interpreter::LastQubit) return static_cast<ClassId>(basis_index & 1U);
  return static_cast<ClassId>(std::popcount(basis_index) % 2);
}

ClassId interpret(const std::string& bits, Interpreter interpreter) {
  return interpret(qsim::basis_index(bits), bits.size(), interpreter);
}

ClassProbabilities class_probabilities(const qsim::SampleResult& result,
                                       Interpreter interpreter) {
  ClassProbabilities probs{0.0, 0.0};
  for (const auto& [bits, n] : result.counts) {
    probs[static_cast<std::size_t>(interpret(bits, interpreter))] += static_cast<double>(n);
  }
  for (double& p : probs) p /= static_cast<double>(result.shots);
  return probs;
}

ClassProbabilities class_probabilities(std::span<const double> basis_probabilities,
                                       std::size_t num_qubits, Interpreter interpreter) {
  ClassProbabilities probs{0.0, 0.0};
  double total = 0.0;
  for (std::size_t k = 0; k < basis_probabilities.size(); ++k) {
    probs[static_cast<std::size_t>(interpret(k, num_qubits, interpreter))] +=
        basis_probabilities[k];
    total += basis_probabilities[k];
  }
  for (double& p : probs) p /= total;
  return probs;
}

ClassProbabilities forward(const QModel& model, std::span<const double> features,
                           std::span<const double> weights, const qsim::NoiseSpec& noise) {
  qsim::validate(noise);
  const auto circuit = build_circuit(features, weights, model);
  if (model.shots == 0) {
    if (noise.depolarizing_prob > 0.0) {
      throw ArgumentError("depolarizing noise requires shot-based sampling (shots >= 1)");
    }
    const auto probs = qsim::run(circuit).probabilities();
    return class_probabilities(probs, circuit.num_qubits(), model.interpreter);
  }
  return class_probabilities(qsim::sample(circuit, model.shots, noise), model.interpreter);
}

double loss(const QModel& model, const EncodedDataset& dataset, std::span<const double> weights,
            const qsim::NoiseSpec& noise) {
  if (dataset.empty()) throw ArgumentError("loss requires a non-empty dataset");
  for (ClassId y : dataset.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= kNumClasses) {
      throw ArgumentError("label out of range for binary model");
    }
  }
  double total = 0.0;
  if (model.shots == 0) {
    qsim::validate(noise);
    if (noise.depolarizing_prob > 0.0) {
      throw ArgumentError("depolarizing noise requires shot-based sampling (shots >= 1)");
    }
    const ExactEvaluator eval(model, weights);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto probs = eval(dataset.row(i));
      const auto label = static_cast<std::size_t>(dataset.labels[i]);
      total -= std::log(std::max(probs[label], kProbabilityFloor));
    }
    return total / static_cast<double>(dataset.size());
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    qsim::NoiseSpec sample_noise{noise.depolarizing_prob, derive_seed(noise.seed, i)};
    const auto probs = forward(model, dataset.row(i), weights, sample_noise);
    const auto label = static_cast<std::size_t>(dataset.labels[i]);
    total -= std::log(std::max(probs[label], kProbabilityFloor));
  }
  return total / static_cast<double>(dataset.size());
}

double accuracy(const QModel& model, const EncodedDataset& dataset,
                std::span<const double> weights, const qsim::NoiseSpec& noise) {
  if (dataset.empty()) throw ArgumentError("accuracy requires a non-empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    qsim::NoiseSpec sample_noise{noise.depolarizing_prob, derive_seed(noise.seed, i)};
    const auto probs = forward(model, dataset.row(i), weights, sample_noise);
    const ClassId predicted = probs[1] > probs[0] ? 1 : 0;
    if (predicted == dataset.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace qfl::qmodels
