#pragma once

// Federation orchestrator: reference-regulated local training, distillation
// pull toward the broadcast model, loss-alignment client selection,
// aggregation and early termination.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfl/dataset.hpp"
#include "qfl/dfo.hpp"
#include "qfl/qmodels.hpp"
#include "qfl/refmodel.hpp"

namespace qfl::fed {

enum class Mode { Baseline, LlmQfl };
enum class AggregationMode { WeightedMean, SelectedMean };
enum class RefKind { ClassicalBaseline, Replay };
enum class DataSource { Synthetic, Csv };

const char* to_string(Mode mode);
const char* to_string(AggregationMode mode);

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  std::filesystem::path csv_path;
  std::size_t samples_per_device = 200;
  std::size_t server_samples = 100;
  double test_fraction = 0.2;
  std::size_t seq_length = 200;
  std::string motif0 = "GCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGC";
  std::string motif1 = "ATATATATATATATATATATATATATATATATATATATATATATATATATATATATATATAT";
  double motif_noise = 0.1;
  double scale_lo = 0.0;
  double scale_hi = std::numbers::pi;
};

struct FedConfig {
  Mode mode = Mode::LlmQfl;
  std::size_t num_devices = 5;
  /// T_max.
  std::size_t rounds = 10;
  std::size_t init_maxiter = 10;
  std::size_t cap = dfo::kDefaultCap;
  dfo::RegulationStrategy strategy;
  /// k in (0, 1].
  double selection_fraction = 1.0;
  double epsilon = 0.0;
  /// Distillation strength.
  double lambda = 0.0;
  std::size_t probe_size = 16;
  AggregationMode aggregation = AggregationMode::WeightedMean;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  /// Weight of an L2 penalty pulling local parameters toward the broadcast
  /// model; 0 disables it.
  double regularization_mu = 0.0;
  /// Initial global parameters are drawn uniformly from [-init_scale, init_scale].
  double init_scale = std::numbers::pi;
  qmodels::QModel model = qmodels::QModel::vqc(4);
  double depolarizing_prob = 0.0;
  dfo::Method method = dfo::Method::NelderMead;
  dfo::MinimizeOptions optimizer;
  RefKind ref_kind = RefKind::ClassicalBaseline;
  std::filesystem::path replay_path;
  refmodel::TrainConfig ref_train;
  DataConfig data;

  bool regulation_enabled() const noexcept { return mode == Mode::LlmQfl; }

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;

  /// Baseline mode is plain federated averaging: regulation off, every
  /// device selected, no distillation and no convergence stop.
  FedConfig effective() const;
};

/// Number of devices selected from `n` candidates: max(1, round(k * n)).
std::size_t selection_count(double fraction, std::size_t n);

struct DeviceRoundStats {
  double loss = 0.0;
  double ref_loss = 0.0;
  std::size_t maxiter_used = 0;
  std::size_t evals = 0;
  bool regulated = false;
  bool failed = false;
  std::string diagnostic;
  double kappa = 0.0;
  std::vector<double> objective_history;
};

struct DeviceState {
  int id = 0;
  EncodedDataset train;
  EncodedDataset test;
  std::vector<double> params;
  dfo::Budget maxiter{1, 1};
  std::vector<double> loss_history;
  refmodel::RefLossProvider ref_provider = refmodel::RefLossProvider::classical({});
  double weight = 0.0;
  DeviceRoundStats last;
};

/// |D_i| / |D| over the devices' training shards.
void assign_weights(std::vector<DeviceState>& devices);

/// Fine-tunes the device's reference provider; throws std::logic_error if it
/// was already fine-tuned.
refmodel::FineTuneMetrics fine_tune_device(DeviceState& dev);

/// One round of local training starting from `global`. For round > 1 the
/// budget is regulated when regulation is enabled and the reference loss is
/// below the device's last loss. An optimizer abort marks the device failed.
DeviceState local_train(DeviceState dev, std::span<const double> global, std::size_t round,
                        const FedConfig& cfg);

struct DistillResult {
  std::vector<double> params;
  double kappa = 0.0;
  bool skipped = false;
};

/// theta_i + clamp(lambda * kappa, 0, 1) * (theta_g - theta_i) with kappa the
/// mean KL(p_global || p_local) over `probe`.
DistillResult distill_step(std::span<const double> local, std::span<const double> global,
                           const EncodedDataset& probe, double lambda,
                           const qmodels::QModel& model, const qsim::NoiseSpec& noise = {});

struct Candidate {
  int id = 0;
  double loss = 0.0;
};

/// Ids of the max(1, round(k * n)) candidates closest to `global_loss`, ties
/// to the lower id, returned in ascending id order.
std::vector<int> select_clients(std::span<const Candidate> candidates, double global_loss,
                                double fraction);

struct Participant {
  int id = 0;
  std::span<const double> params;
  double weight = 0.0;
};

/// Reduces in ascending id order so the result does not depend on input order.
std::vector<double> aggregate(std::span<const Participant> participants, AggregationMode mode);

enum class StopReason { None, Converged, MaxRounds };

const char* to_string(StopReason reason);

struct TerminationDecision {
  bool stop = false;
  StopReason reason = StopReason::None;
  double relative_change = 0.0;
};

/// `history` holds L_s for rounds 1..t.
TerminationDecision check_termination(std::span<const double> history, std::size_t round,
                                      double epsilon, std::size_t max_rounds);

struct DeviceRecord {
  int id = 0;
  DeviceRoundStats stats;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<DeviceRecord> devices;
  /// Loss of the all-device aggregate on the server validation shard.
  double global_loss = 0.0;
  /// Mean loss of the selected devices.
  double selected_loss = 0.0;
  /// sum_i w_i F_i(theta_g) after aggregation.
  double global_train_loss = 0.0;
  double global_val_loss = 0.0;
  std::vector<int> selected;
  std::vector<double> global_params;
  bool terminated = false;
  StopReason reason = StopReason::None;
  double wall_time = 0.0;

  std::size_t total_evals() const;
  std::size_t max_maxiter() const;
};

struct FederationData {
  std::vector<EncodedDataset> device_train;
  std::vector<EncodedDataset> device_test;
  EncodedDataset server_validation;
};

/// Synthetic or CSV data, one-hot/PCA encoded and scaled, partitioned across devices.
FederationData build_federation_data(const FedConfig& cfg);

enum class RunStatus { Completed, Aborted };

struct ExperimentResult {
  std::vector<RoundRecord> records;
  RunStatus status = RunStatus::Completed;
  std::string message;
  std::vector<double> global_params;
};

using RecordSink = std::function<void(const RoundRecord&)>;

ExperimentResult run_experiment(const FedConfig& cfg, const RecordSink& sink = {});
/// Same, on prepared data.
ExperimentResult run_experiment(const FedConfig& cfg, const FederationData& data,
                                const RecordSink& sink = {});

}  // namespace qfl::fed
