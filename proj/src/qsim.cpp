#include "qfl/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qfl/error.hpp"
#include "qfl/random.hpp"

namespace qfl::qsim {

namespace {

constexpr double kNormTolerance = 1e-10;

bool is_single_qubit(GateKind kind) {
  return kind != GateKind::CX && kind != GateKind::CZ;
}

bool is_parameterized(GateKind kind) {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ ||
         kind == GateKind::P;
}

std::size_t log2_exact(std::size_t n) {
  std::size_t q = 0;
  while ((std::size_t{1} << q) < n) ++q;
  return (std::size_t{1} << q) == n ? q : 0;
}

}  // namespace

const char* to_string(GateKind kind) {
  switch (kind) {
    case GateKind::H: return "H";
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::P: return "P";
    case GateKind::CX: return "CX";
    case GateKind::CZ: return "CZ";
  }
  return "?";
}

void validate(const GateOp& op, std::size_t num_qubits) {
  const std::size_t want_targets = is_single_qubit(op.kind) ? 1 : 2;
  const std::size_t want_params = is_parameterized(op.kind) ? 1 : 0;
  auto fail = [&](auto&&... parts) {
    std::ostringstream msg;
    msg << to_string(op.kind);
    ((msg << parts), ...);
    throw StructuralError(msg.str());
  };
  if (op.targets.size() != want_targets) {
    fail(" expects ", want_targets, " target(s), got ", op.targets.size());
  }
  if (op.params.size() != want_params) {
    fail(" expects ", want_params, " angle(s), got ", op.params.size());
  }
  for (std::size_t t : op.targets) {
    if (t >= num_qubits) fail(" target ", t, " out of range for ", num_qubits, " qubit(s)");
  }
  if (want_targets == 2 && op.targets[0] == op.targets[1]) {
    fail(" targets must be distinct (both ", op.targets[0], ")");
  }
  for (double a : op.params) {
    if (!std::isfinite(a)) fail(" angle is not finite");
  }
}

QuantumCircuit::QuantumCircuit(std::size_t num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits < 1 || num_qubits > kMaxQubits) {
    throw StructuralError("circuit qubit count must be in 1..=10, got " +
                          std::to_string(num_qubits));
  }
}

QuantumCircuit& QuantumCircuit::append(GateOp op) {
  validate(op, num_qubits_);
  ops_.push_back(std::move(op));
  return *this;
}

Statevector::Statevector(std::size_t num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits < 1 || num_qubits > kMaxQubits) {
    throw StructuralError("statevector qubit count must be in 1..=10, got " +
                          std::to_string(num_qubits));
  }
  amps_.assign(std::size_t{1} << num_qubits, Complex{0.0, 0.0});
  amps_[0] = 1.0;
}

Statevector::Statevector(std::size_t num_qubits, std::vector<Complex> amplitudes)
    : num_qubits_(num_qubits), amps_(std::move(amplitudes)) {}

Statevector Statevector::from_amplitudes(std::vector<Complex> amplitudes) {
  const std::size_t n = log2_exact(amplitudes.size());
  if (n < 1 || n > kMaxQubits) {
    throw StructuralError("amplitude count must be 2^n with 1 <= n <= 10, got " +
                          std::to_string(amplitudes.size()));
  }
  Statevector s(n, std::move(amplitudes));
  if (std::abs(s.norm() - 1.0) > kNormTolerance) {
    throw ArgumentError("amplitudes are not normalized");
  }
  return s;
}

double Statevector::norm() const {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return std::sqrt(acc);
}

std::vector<double> Statevector::probabilities() const {
  std::vector<double> p(amps_.size());
  std::transform(amps_.begin(), amps_.end(), p.begin(),
                 [](const Complex& a) { return std::norm(a); });
  return p;
}

void Statevector::apply_1q(std::size_t qubit, const Complex (&m)[2][2]) {
  const std::size_t stride = std::size_t{1} << (num_qubits_ - 1 - qubit);
  const std::size_t dim = amps_.size();
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t k = base; k < base + stride; ++k) {
      const Complex a0 = amps_[k];
      const Complex a1 = amps_[k + stride];
      amps_[k] = m[0][0] * a0 + m[0][1] * a1;
      amps_[k + stride] = m[1][0] * a0 + m[1][1] * a1;
    }
  }
}

void Statevector::apply_cx(std::size_t control, std::size_t target) {
  const std::size_t cmask = std::size_t{1} << (num_qubits_ - 1 - control);
  const std::size_t tmask = std::size_t{1} << (num_qubits_ - 1 - target);
  for (std::size_t k = 0; k < amps_.size(); ++k) {
    if ((k & cmask) && !(k & tmask)) std::swap(amps_[k], amps_[k | tmask]);
  }
}

void Statevector::apply_cz(std::size_t a, std::size_t b) {
  const std::size_t mask =
      (std::size_t{1} << (num_qubits_ - 1 - a)) | (std::size_t{1} << (num_qubits_ - 1 - b));
  for (std::size_t k = 0; k < amps_.size(); ++k) {
    if ((k & mask) == mask) amps_[k] = -amps_[k];
  }
}

void Statevector::apply(const GateOp& op) {
  validate(op, num_qubits_);
  using namespace std::complex_literals;
  switch (op.kind) {
    case GateKind::H: {
      const double r = std::numbers::sqrt2 / 2.0;
      const Complex m[2][2] = {{r, r}, {r, -r}};
      apply_1q(op.targets[0], m);
      break;
    }
    case GateKind::RX: {
      const double c = std::cos(op.params[0] / 2.0);
      const double s = std::sin(op.params[0] / 2.0);
      const Complex m[2][2] = {{c, -1i * s}, {-1i * s, c}};
      apply_1q(op.targets[0], m);
      break;
    }
    case GateKind::RY: {
      const double c = std::cos(op.params[0] / 2.0);
      const double s = std::sin(op.params[0] / 2.0);
      const Complex m[2][2] = {{c, -s}, {s, c}};
      apply_1q(op.targets[0], m);
      break;
    }
    case GateKind::RZ: {
      const Complex m[2][2] = {{std::polar(1.0, -op.params[0] / 2.0), 0.0},
                               {0.0, std::polar(1.0, op.params[0] / 2.0)}};
      apply_1q(op.targets[0], m);
      break;
    }
    case GateKind::P: {
      const Complex m[2][2] = {{1.0, 0.0}, {0.0, std::polar(1.0, op.params[0])}};
      apply_1q(op.targets[0], m);
      break;
    }
    case GateKind::CX:
      apply_cx(op.targets[0], op.targets[1]);
      break;
    case GateKind::CZ:
      apply_cz(op.targets[0], op.targets[1]);
      break;
  }
}

void Statevector::apply_diagonal(std::span<const Complex> diagonal) {
  if (diagonal.size() != amps_.size()) {
    throw StructuralError("diagonal has " + std::to_string(diagonal.size()) + " entries for a " +
                          std::to_string(amps_.size()) + "-dimensional state");
  }
  for (std::size_t k = 0; k < amps_.size(); ++k) amps_[k] *= diagonal[k];
}

Statevector apply_gate(Statevector state, const GateOp& op) {
  state.apply(op);
  return state;
}

Statevector run(const QuantumCircuit& circuit) {
  return run(circuit, Statevector(circuit.num_qubits()));
}

Statevector run(const QuantumCircuit& circuit, Statevector initial) {
  if (initial.num_qubits() != circuit.num_qubits()) {
    throw StructuralError("initial state has " + std::to_string(initial.num_qubits()) +
                          " qubit(s), circuit has " + std::to_string(circuit.num_qubits()));
  }
  for (const auto& op : circuit.ops()) initial.apply(op);
  return initial;
}

std::string bitstring(std::uint64_t index, std::size_t num_qubits) {
  std::string bits(num_qubits, '0');
  for (std::size_t q = 0; q < num_qubits; ++q) {
    if ((index >> (num_qubits - 1 - q)) & 1U) bits[q] = '1';
  }
  return bits;
}

std::uint64_t basis_index(const std::string& bits) {
  std::uint64_t index = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw ArgumentError("bitstring '" + bits + "' is not binary");
    index = (index << 1) | static_cast<std::uint64_t>(c - '0');
  }
  return index;
}

std::map<std::string, double> SampleResult::quasi_probabilities() const {
  std::map<std::string, double> out;
  for (const auto& [bits, n] : counts) {
    out[bits] = static_cast<double>(n) / static_cast<double>(shots);
  }
  return out;
}

void validate(const NoiseSpec& noise) {
  if (!(noise.depolarizing_prob >= 0.0 && noise.depolarizing_prob < 1.0)) {
    throw ArgumentError("depolarizing probability must be in [0, 1)");
  }
}

namespace {

std::uint64_t draw_index(const std::vector<double>& cdf, Rng& rng) {
  const double u = uniform01(rng) * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::uint64_t>(it - cdf.begin());
}

std::vector<double> cumulative(std::span<const double> p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    cdf[k] = acc;
  }
  return cdf;
}

}  // namespace

SampleResult sample_distribution(std::span<const double> probabilities,
                                 std::size_t num_qubits, std::uint64_t shots,
                                 std::uint64_t seed) {
  if (shots == 0) throw ArgumentError("shots must be >= 1");
  if (probabilities.size() != (std::size_t{1} << num_qubits)) {
    throw ArgumentError("probability vector size does not match qubit count");
  }
  Rng rng(seed);
  const auto cdf = cumulative(probabilities);
  std::vector<std::uint64_t> hist(probabilities.size(), 0);
  for (std::uint64_t s = 0; s < shots; ++s) ++hist[draw_index(cdf, rng)];
  SampleResult result;
  result.shots = shots;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    if (hist[k] > 0) result.counts[bitstring(k, num_qubits)] = hist[k];
  }
  return result;
}

SampleResult sample(const QuantumCircuit& circuit, std::uint64_t shots, const NoiseSpec& noise) {
  validate(noise);
  if (shots == 0) throw ArgumentError("shots must be >= 1");
  if (noise.depolarizing_prob == 0.0) {
    const auto probs = run(circuit).probabilities();
    return sample_distribution(probs, circuit.num_qubits(), shots, noise.seed);
  }

  Rng rng(noise.seed);
  const std::size_t n = circuit.num_qubits();
  std::vector<std::uint64_t> hist(std::size_t{1} << n, 0);
  for (std::uint64_t s = 0; s < shots; ++s) {
    Statevector state(n);
    for (const auto& op : circuit.ops()) {
      if (uniform01(rng) >= noise.depolarizing_prob) {
        state.apply(op);
        continue;
      }
      for (std::size_t t : op.targets) {
        switch (uniform_index(rng, 3)) {
          case 0: state.apply(GateOp::rx(t, std::numbers::pi)); break;
          case 1: state.apply(GateOp::ry(t, std::numbers::pi)); break;
          default: state.apply(GateOp::rz(t, std::numbers::pi)); break;
        }
      }
    }
    const auto cdf = cumulative(state.probabilities());
    ++hist[draw_index(cdf, rng)];
  }
  SampleResult result;
  result.shots = shots;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    if (hist[k] > 0) result.counts[bitstring(k, n)] = hist[k];
  }
  return result;
}

}  // namespace qfl::qsim
