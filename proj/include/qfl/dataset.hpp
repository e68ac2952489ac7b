#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace qfl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using ClassId = int;

/// Samples x d feature matrix with one class label per row.
struct EncodedDataset {
  Matrix features;
  std::vector<ClassId> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
  bool empty() const noexcept { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features.row(static_cast<Eigen::Index>(i)).data(), dim()};
  }

  /// Throws ArgumentError when row/label counts differ or a feature is non-finite.
  void validate() const;

  /// Rows [begin, end) as a new dataset.
  EncodedDataset slice(std::size_t begin, std::size_t end) const;
  /// Rows at `indices`, in that order.
  EncodedDataset subset(std::span<const std::size_t> indices) const;
};

}  // namespace qfl
