#pragma once

// Dense statevector simulator for small registers.
//
// Bit ordering is big-endian: qubit 0 is the leftmost character of a
// bitstring and the most significant bit of an amplitude index.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qfl::qsim {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 10;

enum class GateKind { H, RX, RY, RZ, P, CX, CZ };

const char* to_string(GateKind kind);

struct GateOp {
  GateKind kind;
  std::vector<double> params;
  std::vector<std::size_t> targets;

  static GateOp h(std::size_t q) { return {GateKind::H, {}, {q}}; }
  static GateOp rx(std::size_t q, double theta) { return {GateKind::RX, {theta}, {q}}; }
  static GateOp ry(std::size_t q, double theta) { return {GateKind::RY, {theta}, {q}}; }
  static GateOp rz(std::size_t q, double theta) { return {GateKind::RZ, {theta}, {q}}; }
  static GateOp p(std::size_t q, double lambda) { return {GateKind::P, {lambda}, {q}}; }
  static GateOp cx(std::size_t control, std::size_t target) {
    return {GateKind::CX, {}, {control, target}};
  }
  static GateOp cz(std::size_t a, std::size_t b) { return {GateKind::CZ, {}, {a, b}}; }
};

/// Throws StructuralError if `op` is malformed or addresses qubits >= num_qubits.
void validate(const GateOp& op, std::size_t num_qubits);

class QuantumCircuit {
 public:
  explicit QuantumCircuit(std::size_t num_qubits);

  std::size_t num_qubits() const noexcept { return num_qubits_; }
  const std::vector<GateOp>& ops() const noexcept { return ops_; }

  /// Validates then appends.
  QuantumCircuit& append(GateOp op);

 private:
  std::size_t num_qubits_;
  std::vector<GateOp> ops_;
};

class Statevector {
 public:
  /// |0...0> on `num_qubits` qubits.
  explicit Statevector(std::size_t num_qubits);

  /// Takes ownership of amplitudes; size must be 2^n with 1 <= n <= kMaxQubits
  /// and the vector must be normalized within 1e-10.
  static Statevector from_amplitudes(std::vector<Complex> amplitudes);

  std::size_t num_qubits() const noexcept { return num_qubits_; }
  std::size_t dim() const noexcept { return amps_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amps_; }
  const Complex& operator[](std::size_t index) const { return amps_[index]; }

  double norm() const;
  /// |amplitude|^2 per basis index.
  std::vector<double> probabilities() const;

  /// In-place gate application; used by apply_gate/run.
  void apply(const GateOp& op);

  /// Multiplies amplitude k by diagonal[k].
  void apply_diagonal(std::span<const Complex> diagonal);

 private:
  Statevector(std::size_t num_qubits, std::vector<Complex> amplitudes);

  void apply_1q(std::size_t qubit, const Complex (&m)[2][2]);
  void apply_cx(std::size_t control, std::size_t target);
  void apply_cz(std::size_t a, std::size_t b);

  std::size_t num_qubits_;
  std::vector<Complex> amps_;
};

/// Returns the state after `op`. Throws StructuralError on invalid targets.
Statevector apply_gate(Statevector state, const GateOp& op);

/// Folds apply_gate over the circuit starting from |0...0>.
Statevector run(const QuantumCircuit& circuit);
/// Folds apply_gate over the circuit starting from `initial`.
Statevector run(const QuantumCircuit& circuit, Statevector initial);

/// Bitstring for basis index `index` on `num_qubits` qubits (qubit 0 leftmost).
std::string bitstring(std::uint64_t index, std::size_t num_qubits);
/// Inverse of bitstring(); throws ArgumentError on non-binary characters.
std::uint64_t basis_index(const std::string& bits);

struct SampleResult {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t shots = 0;

  /// counts / shots, keyed by bitstring.
  std::map<std::string, double> quasi_probabilities() const;

  bool operator==(const SampleResult&) const = default;
};

/// Depolarizing stub. `seed` drives every random draw of a sampling call,
/// including the measurement draws when depolarizing_prob is 0.
struct NoiseSpec {
  double depolarizing_prob = 0.0;
  std::uint64_t seed = 0;
};

void validate(const NoiseSpec& noise);

/// Draws `shots` measurement outcomes of |circuit>. With a nonzero
/// depolarizing probability each shot follows its own trajectory in which
/// every gate is, with that probability, replaced on each of its targets by a
/// uniformly random Pauli (X, Y or Z).
SampleResult sample(const QuantumCircuit& circuit, std::uint64_t shots,
                    const NoiseSpec& noise = {});

/// Draws from a fixed probability vector over basis indices.
SampleResult sample_distribution(std::span<const double> probabilities,
                                 std::size_t num_qubits, std::uint64_t shots,
                                 std::uint64_t seed);

}  // namespace qfl::qsim
