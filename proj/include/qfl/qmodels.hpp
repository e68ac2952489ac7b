#pragma once

// Variational classifiers built on qsim: a ZZ feature map followed by either
// a RealAmplitudes ansatz (VQC) or a convolution/pooling stack (QCNN), with
// measured bitstrings folded into two class probabilities.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qfl/dataset.hpp"
#include "qfl/qsim.hpp"

namespace qfl::qmodels {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr std::size_t kNumClasses = 2;

enum class FeatureMapKind { ZZ };

struct FeatureMapSpec {
  FeatureMapKind kind = FeatureMapKind::ZZ;
  std::size_t num_features = 4;
  std::size_t reps = 1;
};

enum class AnsatzKind { RealAmplitudes, QcnnStack };

struct AnsatzSpec {
  AnsatzKind kind = AnsatzKind::RealAmplitudes;
  std::size_t num_qubits = 4;
  /// RealAmplitudes: entangling repetitions. QcnnStack: conv layers per stage.
  std::size_t reps = 1;

  std::size_t num_weights() const;
};

enum class Interpreter { ParityOfAllBits, LastQubit };

struct QModel {
  FeatureMapSpec feature_map;
  AnsatzSpec ansatz;
  std::size_t num_classes = kNumClasses;
  /// 0 selects exact probabilities from the statevector instead of sampling.
  std::uint64_t shots = 0;
  Interpreter interpreter = Interpreter::ParityOfAllBits;

  std::size_t num_qubits() const noexcept { return ansatz.num_qubits; }
  std::size_t num_weights() const { return ansatz.num_weights(); }

  /// Throws ArgumentError on inconsistent specs.
  void validate() const;

  static QModel vqc(std::size_t num_qubits, std::size_t feature_reps = 1,
                    std::size_t ansatz_reps = 1);
  static QModel qcnn(std::size_t num_qubits, std::size_t feature_reps = 1,
                     std::size_t conv_reps = 1);
};

using ClassProbabilities = std::array<double, kNumClasses>;

/// Appends the ZZ feature map to `circuit`.
void append_zz_feature_map(qsim::QuantumCircuit& circuit, std::span<const double> features,
                           std::size_t reps);

/// Appends a RealAmplitudes ansatz with ring CX entanglement.
void append_real_amplitudes(qsim::QuantumCircuit& circuit, std::span<const double> weights,
                            std::size_t reps);

/// Qubits still active after each QCNN stage, starting with the full register.
std::vector<std::vector<std::size_t>> qcnn_active_sets(std::size_t num_qubits);

qsim::QuantumCircuit build_vqc(std::span<const double> features,
                               std::span<const double> weights, const QModel& model);
qsim::QuantumCircuit build_qcnn(std::span<const double> features,
                                std::span<const double> weights, const QModel& model);
/// Dispatches on the ansatz kind.
qsim::QuantumCircuit build_circuit(std::span<const double> features,
                                   std::span<const double> weights, const QModel& model);

/// Class of one basis outcome: parity of all bits, or the value of the last qubit.
ClassId interpret(std::uint64_t basis_index, std::size_t num_qubits, Interpreter interpreter);
ClassId interpret(const std::string& bits, Interpreter interpreter);

ClassProbabilities class_probabilities(const qsim::SampleResult& result,
                                       Interpreter interpreter);
ClassProbabilities class_probabilities(std::span<const double> basis_probabilities,
                                       std::size_t num_qubits, Interpreter interpreter);

ClassProbabilities forward(const QModel& model, std::span<const double> features,
                           std::span<const double> weights, const qsim::NoiseSpec& noise = {});

/// Mean cross-entropy over the dataset with probabilities floored at 1e-12.
/// Sample i is drawn with seed derive_seed(noise.seed, i).
double loss(const QModel& model, const EncodedDataset& dataset, std::span<const double> weights,
            const qsim::NoiseSpec& noise = {});

/// Fraction of rows whose most likely class matches the label.
double accuracy(const QModel& model, const EncodedDataset& dataset,
                std::span<const double> weights, const qsim::NoiseSpec& noise = {});

}  // namespace qfl::qmodels
