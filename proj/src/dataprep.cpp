#include "qfl/dataprep.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qfl/error.hpp"
#include "qfl/random.hpp"

namespace qfl {

void EncodedDataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ArgumentError("dataset has " + std::to_string(features.rows()) + " row(s) but " +
                        std::to_string(labels.size()) + " label(s)");
  }
  if (!features.allFinite()) throw ArgumentError("dataset contains non-finite features");
}

EncodedDataset EncodedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ArgumentError("slice out of range");
  EncodedDataset out;
  out.features = features.middleRows(static_cast<Eigen::Index>(begin),
                                     static_cast<Eigen::Index>(end - begin));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> indices) const {
  EncodedDataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw ArgumentError("subset index out of range");
    out.features.row(static_cast<Eigen::Index>(k)) =
        features.row(static_cast<Eigen::Index>(indices[k]));
    out.labels.push_back(labels[indices[k]]);
  }
  return out;
}

}  // namespace qfl

namespace qfl::dataprep {

namespace {

constexpr std::string_view kAlphabet = "ACGT";

int base_code(char c) {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    case 'T': return 3;
    default: return -1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

ClassId parse_label(std::string_view field, std::size_t line_no) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  throw ParseError("line " + std::to_string(line_no) + ": label '" + std::string(field) +
                       "' is not a binary class id (0 or 1)",
                   line_no);
}

double parse_feature(std::string_view field, std::size_t line_no, std::size_t column) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": column " + std::to_string(column) +
                         " value '" + std::string(field) + "' is not a number",
                     line_no, column);
  }
  if (!std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": column " + std::to_string(column) +
                         " value is not finite",
                     line_no, column);
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<int> integer_encode(std::string_view bases) {
  if (bases.empty()) throw ParseError("empty nucleotide sequence");
  std::vector<int> codes(bases.size());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    codes[i] = base_code(bases[i]);
    if (codes[i] < 0) {
      throw ParseError("unknown nucleotide '" + std::string(1, bases[i]) + "' at index " +
                           std::to_string(i),
                       0, i);
    }
  }
  return codes;
}

std::string integer_decode(const std::vector<int>& codes) {
  std::string out(codes.size(), '?');
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] > 3) throw ArgumentError("nucleotide code out of range");
    out[i] = kAlphabet[static_cast<std::size_t>(codes[i])];
  }
  return out;
}

std::vector<double> one_hot_encode(std::string_view bases) {
  const auto codes = integer_encode(bases);
  std::vector<double> out(4 * codes.size(), 0.0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out[4 * i + static_cast<std::size_t>(codes[i])] = 1.0;
  }
  return out;
}

EncodedDataset one_hot_dataset(const std::vector<NucleotideSequence>& sequences) {
  if (sequences.empty()) throw ArgumentError("no sequences to encode");
  const std::size_t len = sequences.front().bases.size();
  EncodedDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(sequences.size()),
                     static_cast<Eigen::Index>(4 * len));
  ds.labels.reserve(sequences.size());
  for (std::size_t r = 0; r < sequences.size(); ++r) {
    if (sequences[r].bases.size() != len) {
      throw ArgumentError("sequence " + std::to_string(r) + " has length " +
                          std::to_string(sequences[r].bases.size()) + ", expected " +
                          std::to_string(len));
    }
    const auto row = one_hot_encode(sequences[r].bases);
    ds.features.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
    ds.labels.push_back(sequences[r].label);
  }
  return ds;
}

PcaModel pca_fit(const Matrix& features, std::size_t n_components) {
  const auto n = static_cast<std::size_t>(features.rows());
  const auto d = static_cast<std::size_t>(features.cols());
  if (n_components < 1) throw ArgumentError("n_components must be >= 1");
  if (n_components > d) {
    throw ArgumentError("n_components " + std::to_string(n_components) +
                        " exceeds input dimension " + std::to_string(d));
  }
  if (n <= n_components) {
    throw ArgumentError("PCA needs more samples than components (" + std::to_string(n) +
                        " <= " + std::to_string(n_components) + ")");
  }
  if (!features.allFinite()) throw ArgumentError("PCA input contains non-finite values");

  PcaModel model;
  model.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (cov.diagonal().maxCoeff() <= 0.0) {
    throw ArgumentError("PCA input has zero variance in every column");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ArgumentError("covariance eigensolver failed");

  // Eigen returns ascending eigenvalues.
  model.components.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_components));
  model.explained_variance.resize(static_cast<Eigen::Index>(n_components));
  for (std::size_t k = 0; k < n_components; ++k) {
    const auto src = static_cast<Eigen::Index>(d - 1 - k);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) v = -v;
    model.components.col(static_cast<Eigen::Index>(k)) = v;
    model.explained_variance[static_cast<Eigen::Index>(k)] =
        std::max(0.0, solver.eigenvalues()[src]);
  }
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != model.input_dim()) {
    throw ArgumentError("PCA transform expects " + std::to_string(model.input_dim()) +
                        " column(s), got " + std::to_string(features.cols()));
  }
  return (features.rowwise() - model.mean.transpose()) * model.components;
}

MinMaxScaler MinMaxScaler::fit(const Matrix& features, double lo, double hi) {
  if (features.rows() == 0) throw ArgumentError("cannot fit a scaler on zero rows");
  if (!(hi > lo)) throw ArgumentError("scaler range must satisfy hi > lo");
  MinMaxScaler s;
  s.min = features.colwise().minCoeff().transpose();
  s.max = features.colwise().maxCoeff().transpose();
  s.lo = lo;
  s.hi = hi;
  return s;
}

Matrix MinMaxScaler::transform(const Matrix& features) const {
  if (features.cols() != min.size()) throw ArgumentError("scaler column count mismatch");
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double span = max[c] - min[c];
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      double unit = span > 0.0 ? (features(r, c) - min[c]) / span : 0.5;
      unit = std::clamp(unit, 0.0, 1.0);
      out(r, c) = lo + (hi - lo) * unit;
    }
  }
  return out;
}

std::vector<NucleotideSequence> synth_genomic(const SynthGenomicOptions& options) {
  if (options.length < 1) throw ArgumentError("sequence length must be >= 1");
  for (const auto* motif : {&options.motif0, &options.motif1}) {
    integer_encode(*motif);
    if (motif->size() >= options.length) {
      throw ArgumentError("motifs must be shorter than the sequence length");
    }
  }
  if (!(options.noise >= 0.0 && options.noise <= 1.0)) {
    throw ArgumentError("motif noise must be a probability");
  }
  Rng rng(options.seed);
  std::vector<NucleotideSequence> out;
  out.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    const ClassId label = static_cast<ClassId>(i % 2);
    const std::string& motif = label == 0 ? options.motif0 : options.motif1;
    std::string bases(options.length, 'A');
    for (char& b : bases) b = kAlphabet[uniform_index(rng, 4)];
    const std::size_t offset = uniform_index(rng, options.length - motif.size() + 1);
    for (std::size_t k = 0; k < motif.size(); ++k) {
      const bool corrupt = uniform01(rng) < options.noise;
      const char replacement = kAlphabet[uniform_index(rng, 4)];
      bases[offset + k] = corrupt ? replacement : motif[k];
    }
    out.push_back({std::move(bases), label});
  }
  return out;
}

CsvContent parse_csv(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, nl - start));
    if (!line.empty()) lines.emplace_back(line_no, line);
    start = nl + 1;
  }
  if (lines.empty()) throw ParseError("CSV is empty (missing header row)", 1);

  const auto header = split_fields(lines.front().second);
  const std::size_t header_line = lines.front().first;
  if (header.back() != "label") {
    throw ParseError("line " + std::to_string(header_line) + ": missing 'label' column",
                     header_line);
  }

  if (header.size() == 2 && header[0] == "seq") {
    std::vector<NucleotideSequence> seqs;
    for (std::size_t k = 1; k < lines.size(); ++k) {
      const auto [no, line] = lines[k];
      const auto fields = split_fields(line);
      if (fields.size() != 2) {
        throw ParseError("line " + std::to_string(no) + ": expected 2 column(s), got " +
                             std::to_string(fields.size()),
                         no);
      }
      try {
        integer_encode(fields[0]);
      } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(no) + ": " + e.what(), no, e.position());
      }
      if (!seqs.empty() && fields[0].size() != seqs.front().bases.size()) {
        throw ParseError("line " + std::to_string(no) + ": sequence length differs from line " +
                             std::to_string(lines[1].first),
                         no);
      }
      seqs.push_back({std::string(fields[0]), parse_label(fields[1], no)});
    }
    return seqs;
  }

  const std::size_t dims = header.size() - 1;
  if (dims == 0) {
    throw ParseError("line " + std::to_string(header_line) + ": no feature columns",
                     header_line);
  }
  for (std::size_t c = 0; c < dims; ++c) {
    if (header[c] != "f" + std::to_string(c)) {
      throw ParseError("line " + std::to_string(header_line) + ": expected column 'f" +
                           std::to_string(c) + "', got '" + std::string(header[c]) + "'",
                       header_line, c);
    }
  }
  EncodedDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(lines.size() - 1),
                     static_cast<Eigen::Index>(dims));
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto [no, line] = lines[k];
    const auto fields = split_fields(line);
    if (fields.size() != dims + 1) {
      throw ParseError("line " + std::to_string(no) + ": expected " + std::to_string(dims + 1) +
                           " column(s), got " + std::to_string(fields.size()),
                       no);
    }
    for (std::size_t c = 0; c < dims; ++c) {
      ds.features(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(c)) =
          parse_feature(fields[c], no, c);
    }
    ds.labels.push_back(parse_label(fields[dims], no));
  }
  return ds;
}

CsvContent load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open CSV file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void write_csv(const std::filesystem::path& path, const EncodedDataset& dataset) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write CSV file '" + path.string() + "'");
  for (std::size_t c = 0; c < dataset.dim(); ++c) out << 'f' << c << ',';
  out << "label\n";
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (double v : dataset.row(r)) out << format_double(v) << ',';
    out << dataset.labels[r] << '\n';
  }
}

void write_csv(const std::filesystem::path& path,
               const std::vector<NucleotideSequence>& sequences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write CSV file '" + path.string() + "'");
  out << "seq,label\n";
  for (const auto& s : sequences) out << s.bases << ',' << s.label << '\n';
}

Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("test fraction must be in [0, 1)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  }
  const std::size_t n_test =
      std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 0.5)));
  Split s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace qfl::dataprep
