#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "qfl/dataprep.hpp"
#include "qfl/error.hpp"
#include "support/oracles.hpp"

using namespace qfl;
using namespace qfl::dataprep;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(n, d);
  // Correlated columns so the spectrum is well separated.
  Eigen::MatrixXd mix(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) mix(i, j) = g(rng) / static_cast<double>(1 + i);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng);
  return x * mix;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qfl_dataprep_" + name);
}

}  // namespace

TEST(Dataprep, IntegerEncoding) {
  EXPECT_EQ(integer_encode("ACGT"), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(integer_encode("AAAA"), (std::vector<int>{0, 0, 0, 0}));
  EXPECT_EQ(integer_decode(integer_encode("GATTACA")), "GATTACA");
  try {
    integer_encode("ACGX");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 3U);
  }
}

TEST(Dataprep, OneHotRows) {
  EXPECT_EQ(one_hot_encode("AC"), (std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0}));
  EXPECT_EQ(one_hot_encode("T"), (std::vector<double>{0, 0, 0, 1}));
  EXPECT_EQ(one_hot_encode("G"), (std::vector<double>{0, 0, 1, 0}));
  const auto v = one_hot_encode("GATTACAGC");
  ASSERT_EQ(v.size(), 36U);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_DOUBLE_EQ(v[4 * i] + v[4 * i + 1] + v[4 * i + 2] + v[4 * i + 3], 1.0);
  }
}

TEST(Dataprep, OneHotDatasetNeedsEqualLengths) {
  EXPECT_THROW(one_hot_dataset({{"AC", 0}, {"A", 1}}), ArgumentError);
  const auto ds = one_hot_dataset({{"AC", 0}, {"GT", 1}});
  EXPECT_EQ(ds.size(), 2U);
  EXPECT_EQ(ds.dim(), 8U);
}

TEST(Dataprep, PcaOnLine) {
  Matrix x(5, 2);
  for (int i = 0; i < 5; ++i) x.row(i) << i, 2.0 * i;
  const auto m = pca_fit(x, 2);
  EXPECT_NEAR(m.components(0, 0), 1.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(m.components(1, 0), 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(m.explained_variance[1], 0.0, 1e-12);
}

TEST(Dataprep, PcaMatchesJacobiOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = 2 + trial % 6;
    const auto x = random_matrix(rng, 40 + trial, d);
    const std::size_t k = 1 + static_cast<std::size_t>(trial) % static_cast<std::size_t>(d);
    const auto m = pca_fit(x, k);
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    oracle::jacobi_eigen(oracle::covariance(x), values, vectors);
    for (std::size_t c = 0; c < k; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      EXPECT_NEAR(m.explained_variance[ci], values[ci], 1e-8);
      const double same = (m.components.col(ci) - vectors.col(ci)).cwiseAbs().maxCoeff();
      const double flip = (m.components.col(ci) + vectors.col(ci)).cwiseAbs().maxCoeff();
      EXPECT_LT(std::min(same, flip), 1e-8);
    }
  }
}

TEST(Dataprep, PcaTransformProperties) {
  std::mt19937_64 rng(13);
  const auto x = random_matrix(rng, 300, 5);
  const auto m = pca_fit(x, 3);
  Matrix mean_row = m.mean.transpose();
  const auto z = pca_transform(m, mean_row);
  EXPECT_EQ(z.cols(), 3);
  EXPECT_LT(z.cwiseAbs().maxCoeff(), 1e-12);
  const auto t = pca_transform(m, x);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double var = t.col(c).squaredNorm() / static_cast<double>(t.rows() - 1);
    EXPECT_NEAR(var / m.explained_variance[c], 1.0, 0.02);
  }
  const auto full = pca_fit(x, 5);
  Matrix back = pca_transform(full, x) * full.components.transpose();
  back.rowwise() += full.mean.transpose();
  EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW(pca_fit(x, 0), ArgumentError);
  EXPECT_THROW(pca_transform(m, Matrix::Zero(2, 4)), ArgumentError);
  EXPECT_THROW(pca_fit(Matrix::Ones(10, 3), 1), ArgumentError);
}

TEST(Dataprep, MinMaxScaler) {
  Matrix x(3, 2);
  x << 0, 10, 5, 20, 10, 30;
  const auto s = MinMaxScaler::fit(x, 0.0, 2.0);
  const auto y = s.transform(x);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(y(2, 0), 2.0);
  Matrix out(1, 2);
  out << 20, -5;
  const auto clipped = s.transform(out);
  EXPECT_DOUBLE_EQ(clipped(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(clipped(0, 1), 0.0);
}

TEST(Dataprep, SynthGenomic) {
  SynthGenomicOptions o;
  o.n = 10;
  const auto a = synth_genomic(o);
  int ones = 0;
  for (const auto& s : a) {
    EXPECT_EQ(s.bases.size(), o.length);
    ones += s.label;
  }
  EXPECT_EQ(ones, 5);
  const auto b = synth_genomic(o);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].bases, b[i].bases);
  o.noise = 0.0;
  for (const auto& s : synth_genomic(o)) {
    EXPECT_NE(s.bases.find(s.label == 0 ? o.motif0 : o.motif1), std::string::npos);
  }
  o.motif0 = std::string(o.length, 'A');
  EXPECT_THROW(synth_genomic(o), ArgumentError);
}

TEST(Dataprep, CsvRawAndEncoded) {
  const auto raw = parse_csv("seq,label\nACGT,0\nTTTT,1\nGGCA,0\n");
  const auto& seqs = std::get<std::vector<NucleotideSequence>>(raw);
  EXPECT_EQ(seqs.size(), 3U);
  EXPECT_EQ(seqs[1].bases, "TTTT");
  const auto enc = parse_csv("f0,f1,label\n0.5,1.25,1\n-2,3,0\n");
  const auto& ds = std::get<EncodedDataset>(enc);
  EXPECT_EQ(ds.size(), 2U);
  EXPECT_DOUBLE_EQ(ds.features(1, 0), -2.0);
  try {
    parse_csv("seq,label\nACGT,0\nACGT,2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3U);
  }
  EXPECT_THROW(parse_csv("seq,label\nACGU,0\n"), ParseError);
  EXPECT_THROW(parse_csv("f0,label\nabc,1\n"), ParseError);
  EXPECT_THROW(load_csv(temp_file("does_not_exist.csv")), ParseError);
}

TEST(Dataprep, CsvRoundTrip) {
  EncodedDataset ds;
  ds.features.resize(3, 2);
  ds.features << 0.1, -2.5, 1e-7, 3.0, 0.3333333333333333, 12345.678;
  ds.labels = {0, 1, 1};
  const auto path = temp_file("enc.csv");
  write_csv(path, ds);
  const auto back = std::get<EncodedDataset>(load_csv(path));
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_TRUE(back.features == ds.features);
  const std::vector<NucleotideSequence> seqs = {{"ACGT", 1}, {"GGGG", 0}};
  const auto raw_path = temp_file("raw.csv");
  write_csv(raw_path, seqs);
  const auto raw = std::get<std::vector<NucleotideSequence>>(load_csv(raw_path));
  EXPECT_EQ(raw[0].bases, "ACGT");
  EXPECT_EQ(raw[1].label, 0);
  std::filesystem::remove(path);
  std::filesystem::remove(raw_path);
}

TEST(Dataprep, TrainTestSplit) {
  const auto s = train_test_split(10, 0.2, 4);
  EXPECT_EQ(s.test.size(), 2U);
  EXPECT_EQ(s.train.size(), 8U);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  const auto again = train_test_split(10, 0.2, 4);
  EXPECT_EQ(again.test, s.test);
}
