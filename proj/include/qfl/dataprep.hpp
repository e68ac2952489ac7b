#pragma once

// Nucleotide encodings, PCA, the synthetic genomic generator, CSV I/O and
// train/test splitting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qfl/dataset.hpp"

namespace qfl::dataprep {

struct NucleotideSequence {
  std::string bases;
  ClassId label = 0;
};

/// A->0, C->1, G->2, T->3. Throws ParseError with the offending index.
std::vector<int> integer_encode(std::string_view bases);
std::string integer_decode(const std::vector<int>& codes);

/// Concatenated 4-wide one-hot rows, A=[1,0,0,0] ... T=[0,0,0,1].
std::vector<double> one_hot_encode(std::string_view bases);

/// One-hot encodes every sequence; all sequences must share one length.
EncodedDataset one_hot_dataset(const std::vector<NucleotideSequence>& sequences);

struct PcaModel {
  Vector mean;
  /// d_in x n_components, orthonormal columns.
  Matrix components;
  /// Descending eigenvalues of the sample covariance (divisor n-1).
  Vector explained_variance;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t num_components() const noexcept {
    return static_cast<std::size_t>(components.cols());
  }
};

/// Covariance eigendecomposition. Each component is sign-normalized so its
/// largest-magnitude entry is positive (the first such entry on ties).
/// Throws ArgumentError when the input has zero variance in every column.
PcaModel pca_fit(const Matrix& features, std::size_t n_components);

/// (X - mean) * components.
Matrix pca_transform(const PcaModel& model, const Matrix& features);

/// Per-column affine map of the fit range onto [lo, hi]; values outside the
/// fit range are clipped.
struct MinMaxScaler {
  Vector min;
  Vector max;
  double lo = 0.0;
  double hi = 0.0;

  static MinMaxScaler fit(const Matrix& features, double lo, double hi);
  Matrix transform(const Matrix& features) const;
};

struct SynthGenomicOptions {
  std::size_t n = 200;
  std::size_t length = 200;
  std::string motif0 = "GCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGCGC";
  std::string motif1 = "ATATATATATATATATATATATATATATATATATATATATATATATATATATATATATATAT";
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Uniform random background with class-c motif planted at a uniform random
/// offset; each motif base is replaced by a uniform random base with
/// probability `noise`. Labels alternate 0,1,0,1,...
std::vector<NucleotideSequence> synth_genomic(const SynthGenomicOptions& options);

using CsvContent = std::variant<EncodedDataset, std::vector<NucleotideSequence>>;

/// Reads `seq,label` (raw) or `f0,...,fk,label` (encoded) files. Errors name
/// the 1-based line number.
CsvContent load_csv(const std::filesystem::path& path);
CsvContent parse_csv(std::string_view text);

void write_csv(const std::filesystem::path& path, const EncodedDataset& dataset);
void write_csv(const std::filesystem::path& path,
               const std::vector<NucleotideSequence>& sequences);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, n) split so |test| = round(n * test_fraction).
Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed);

}  // namespace qfl::dataprep
