#pragma once

// Reference-loss providers standing in for a fine-tuned language model, and
// the KL divergence used for distillation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qfl/dataset.hpp"

namespace qfl::refmodel {

inline constexpr double kLossFloor = 1e-12;

struct TrainConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

/// Multinomial logistic regression trained with full-batch gradient descent.
struct BaselineModel {
  Matrix weights;  // features x classes
  Vector bias;     // classes
  TrainConfig train_config;

  static BaselineModel train(const EncodedDataset& dataset, const TrainConfig& config,
                             std::size_t num_classes = 2);

  std::vector<double> predict_proba(std::span<const double> features) const;
  /// Mean cross-entropy, probabilities floored at 1e-12.
  double cross_entropy(const EncodedDataset& dataset) const;
  double accuracy(const EncodedDataset& dataset) const;
};

struct ReplayRecord {
  int device_id = 0;
  std::vector<double> losses;
  std::optional<double> f1;
};

/// Parses the JSON-lines replay format, one object per device:
/// {"device_id": int, "losses": [float, ...], "f1": float?}.
std::vector<ReplayRecord> parse_replay(std::string_view text);
std::vector<ReplayRecord> load_replay(const std::filesystem::path& path);

struct FineTuneMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

enum class ProviderKind { ClassicalBaseline, Replay };

class RefLossProvider {
 public:
  static RefLossProvider classical(TrainConfig config);
  static RefLossProvider replay(ReplayRecord record);

  ProviderKind kind() const noexcept { return kind_; }
  bool fine_tuned() const noexcept { return fine_tuned_; }

  /// Baseline: trains on `dataset`. Replay: returns the recorded round-1 loss
  /// (accuracy is the recorded f1 when present, else 0).
  FineTuneMetrics fine_tune(const EncodedDataset& dataset);

  /// Baseline: cross-entropy on `held_out`. Replay: recorded value for
  /// `round`, reusing the last value past the end of the recording.
  /// Always >= kLossFloor.
  double eval_loss(const EncodedDataset& held_out, std::size_t round) const;

  const std::optional<BaselineModel>& baseline() const noexcept { return model_; }

 private:
  RefLossProvider() = default;

  ProviderKind kind_ = ProviderKind::ClassicalBaseline;
  TrainConfig config_;
  std::optional<BaselineModel> model_;
  ReplayRecord record_;
  bool fine_tuned_ = false;
};

/// sum_i p_i ln(p_i / max(q_i, 1e-12)); terms with p_i = 0 contribute 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace qfl::refmodel
