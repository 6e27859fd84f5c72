#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "s2d/error.h"
#include "s2d/retrieval.h"
#include "test_util.h"

namespace s2d {
namespace {

std::vector<std::vector<float>> RandomSamples(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<std::vector<float>> out(n, std::vector<float>(dim));
  for (auto& s : out) {
    for (int i = 0; i < dim; ++i) s[i] = g(rng) * static_cast<float>(dim - i);
  }
  return out;
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(GlobalDescriptorTest, NormalizesAndRejectsZero) {
  const std::vector<float> v = {3.0f, 4.0f};
  const GlobalDescriptor d = MakeGlobalDescriptor(v);
  EXPECT_FLOAT_EQ(d.values[0], 0.6f);
  EXPECT_FLOAT_EQ(d.values[1], 0.8f);
  const std::vector<float> zero(3, 0.0f);
  EXPECT_EQ(CodeOf([&] { MakeGlobalDescriptor(zero); }), ErrorCode::kDegenerateDescriptor);
}

TEST(FitPcaTest, PointsOnDiagonalLine) {
  const std::vector<std::vector<float>> pts = {{1, 1}, {2, 2}, {3, 3}, {-1, -1}};
  const PcaModel m = FitPca(pts, 1);
  ASSERT_EQ(m.output_dim(), 1);
  EXPECT_NEAR(m.basis(0, 0), 0.70710678118654752, 1e-9);
  EXPECT_NEAR(m.basis(0, 1), 0.70710678118654752, 1e-9);
  // Sample covariance (n - 1 normalization) of the four points.
  EXPECT_NEAR(m.eigenvalues[0], 5.8333333333333333, 1e-9);
  EXPECT_NEAR(m.mean[0], 1.25, 1e-12);
}

TEST(FitPcaTest, IdenticalSamplesGiveDeterministicBasis) {
  const std::vector<std::vector<float>> pts(5, std::vector<float>{0.5f, -1.0f, 2.0f});
  const PcaModel a = FitPca(pts, 3);
  const PcaModel b = FitPca(pts, 3);
  EXPECT_EQ(a.basis, b.basis);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.eigenvalues[i], 0.0, 1e-12);
  // Axis-ordered tie rule on a zero covariance yields the identity.
  EXPECT_LT((a.basis - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitPcaTest, FullDimensionReconstructs) {
  std::mt19937_64 rng(1);
  const auto samples = RandomSamples(rng, 20, 6);
  const PcaModel m = FitPca(samples, 6);
  for (const auto& s : samples) {
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x[i] = s[i];
    const Eigen::VectorXd y = m.basis * (x - m.mean);
    const Eigen::VectorXd back = m.basis.transpose() * y + m.mean;
    EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FitPcaTest, BasisInvariants) {
  std::mt19937_64 rng(2);
  for (const auto& [n, dim, k] : {std::tuple{50, 8, 5}, std::tuple{6, 40, 5}}) {
    const auto samples = RandomSamples(rng, n, dim);
    const PcaModel m = FitPca(samples, k);
    const Eigen::MatrixXd gram = m.basis * m.basis.transpose();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-6);
    double partial = 0.0;
    for (int i = 0; i < k; ++i) {
      if (i > 0) {
        EXPECT_LE(m.eigenvalues[i], m.eigenvalues[i - 1]);
      }
      EXPECT_GE(m.eigenvalues[i], -1e-9);
      partial += m.eigenvalues[i];
      EXPECT_LE(partial, m.total_variance + 1e-6);
      Eigen::Index arg;
      m.basis.row(i).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(m.basis(i, arg), 0.0);
    }
  }
}

TEST(FitPcaTest, GramTrickMatchesCovariancePath) {
  // Same data seen through both branches: D <= n and D > n after padding
  // with zero columns leaves the leading components unchanged.
  std::mt19937_64 rng(3);
  const auto samples = RandomSamples(rng, 10, 4);
  std::vector<std::vector<float>> padded = samples;
  for (auto& s : padded) s.resize(30, 0.0f);
  const PcaModel a = FitPca(samples, 4);
  const PcaModel b = FitPca(padded, 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(a.eigenvalues[i], b.eigenvalues[i], 1e-9);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(a.basis(i, j), b.basis(i, j), 1e-8);
  }
}

TEST(FitPcaTest, Errors) {
  const std::vector<std::vector<float>> one = {{1.0f, 2.0f}};
  EXPECT_EQ(CodeOf([&] { FitPca(one, 1); }), ErrorCode::kInsufficientSamples);
  const std::vector<std::vector<float>> three = {{1, 2, 3}, {2, 3, 4}, {0, 1, 5}};
  EXPECT_EQ(CodeOf([&] { FitPca(three, 3); }), ErrorCode::kDimensionTooLarge);
  EXPECT_NO_THROW(FitPca(three, 2));
}

TEST(ApplyPcaTest, MeanIsDegenerate) {
  // Integer samples summing to multiples of 8 keep the mean exact in float.
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> v(-20, 20);
  std::vector<std::vector<float>> samples(8, std::vector<float>(5));
  for (auto& s : samples) {
    for (auto& x : s) x = static_cast<float>(v(rng));
  }
  const PcaModel m = FitPca(samples, 3);
  std::vector<float> mean(5);
  for (int i = 0; i < 5; ++i) mean[i] = static_cast<float>(m.mean[i]);
  EXPECT_EQ(CodeOf([&] { ApplyPca(m, mean); }), ErrorCode::kDegenerateDescriptor);
  std::vector<float> out(3, 1.0f);
  EXPECT_FALSE(TryApplyPca(m, mean, out));
  EXPECT_EQ(out, std::vector<float>(3, 0.0f));
  const std::vector<float> wrong(4, 1.0f);
  EXPECT_EQ(CodeOf([&] { ApplyPca(m, wrong); }), ErrorCode::kDimensionMismatch);
}

TEST(ApplyPcaTest, IdentityModelNormalizes) {
  PcaModel m;
  m.mean = Eigen::VectorXd::Zero(3);
  m.basis = Eigen::MatrixXd::Identity(3, 3);
  m.eigenvalues = Eigen::VectorXd::Ones(3);
  const std::vector<float> d = {0.0f, 3.0f, -4.0f};
  const GlobalDescriptor out = ApplyPca(m, d);
  EXPECT_FLOAT_EQ(out.values[0], 0.0f);
  EXPECT_FLOAT_EQ(out.values[1], 0.6f);
  EXPECT_FLOAT_EQ(out.values[2], -0.8f);
}

TEST(ApplyPcaTest, OutputsAreUnitNorm) {
  std::mt19937_64 rng(5);
  const auto samples = RandomSamples(rng, 30, 12);
  for (const bool whiten : {false, true}) {
    const PcaModel m = FitPca(samples, 6, {whiten, 1e-8});
    for (const auto& s : RandomSamples(rng, 100, 12)) {
      const GlobalDescriptor g = ApplyPca(m, s);
      EXPECT_NEAR(L2Norm(g.values), 1.0, 1e-6);
    }
  }
}

TEST(ApplyPcaTest, WhiteningEqualizesComponentVariance) {
  std::mt19937_64 rng(6);
  const auto samples = RandomSamples(rng, 400, 4);
  const PcaModel m = FitPca(samples, 4, {true, 1e-8});
  // Whitened (pre-normalization) coordinates have unit variance.
  for (int i = 0; i < 4; ++i) {
    double var = 0.0;
    for (const auto& s : samples) {
      Eigen::VectorXd x(4);
      for (int j = 0; j < 4; ++j) x[j] = s[j];
      const double y = m.basis.row(i).dot(x - m.mean) / std::sqrt(m.eigenvalues[i] + 1e-8);
      var += y * y;
    }
    EXPECT_NEAR(var / (samples.size() - 1), 1.0, 1e-6);
  }
}

DescriptorDatabase MakeDb(const std::vector<std::pair<std::string, std::vector<float>>>& e) {
  DescriptorDatabase db;
  for (const auto& [id, v] : e) db.Add(id, MakeGlobalDescriptor(v));
  return db;
}

TEST(RankTest, TwoAxes) {
  const DescriptorDatabase db = MakeDb({{"a", {1, 0}}, {"b", {0, 1}}});
  const auto r = Rank(MakeGlobalDescriptor(std::vector<float>{1, 0}), db, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].id, "a");
  EXPECT_DOUBLE_EQ(r[0].score, 1.0);
  EXPECT_EQ(r[1].id, "b");
  EXPECT_DOUBLE_EQ(r[1].score, 0.0);
}

TEST(RankTest, ExactEntryRanksFirst) {
  std::mt19937_64 rng(7);
  DescriptorDatabase db;
  std::vector<std::vector<float>> vs;
  for (int i = 0; i < 20; ++i) {
    vs.push_back(testing::RandomUnitVector(rng, 16));
    db.Add("id" + std::to_string(i), MakeGlobalDescriptor(vs.back()));
  }
  const auto r = Rank(MakeGlobalDescriptor(vs[13]), db, 5);
  ASSERT_EQ(r.size(), 5u);
  EXPECT_EQ(r[0].id, "id13");
  EXPECT_NEAR(r[0].score, 1.0, 1e-6);
}

TEST(RankTest, TiesBrokenByAscendingId) {
  const DescriptorDatabase db =
      MakeDb({{"zeta", {1, 0}}, {"alpha", {1, 0}}, {"mid", {0, 1}}, {"beta", {1, 0}}});
  const auto r = Rank(MakeGlobalDescriptor(std::vector<float>{1, 0}), db, 10);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].id, "alpha");
  EXPECT_EQ(r[1].id, "beta");
  EXPECT_EQ(r[2].id, "zeta");
  EXPECT_EQ(r[3].id, "mid");
}

TEST(RankTest, DotProductMatchesEuclideanOrder) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    const int dim = 2 + static_cast<int>(rng() % 15);
    DescriptorDatabase db;
    std::vector<std::vector<float>> vs;
    for (int i = 0; i < n; ++i) {
      vs.push_back(testing::RandomUnitVector(rng, dim));
      db.Add("e" + std::to_string(1000 + i), MakeGlobalDescriptor(vs.back()));
    }
    const auto q = testing::RandomUnitVector(rng, dim);
    const auto ranked = Rank(MakeGlobalDescriptor(q), db, n);
    std::vector<int> by_distance(n);
    std::iota(by_distance.begin(), by_distance.end(), 0);
    std::vector<double> dist(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < dim; ++j) s += (double(q[j]) - vs[i][j]) * (double(q[j]) - vs[i][j]);
      dist[i] = s;
    }
    std::stable_sort(by_distance.begin(), by_distance.end(),
                     [&](int a, int b) { return dist[a] < dist[b]; });
    for (int i = 0; i < n; ++i) ASSERT_EQ(ranked[i].index, static_cast<std::size_t>(by_distance[i]));
  }
}

TEST(RankTest, EmptyDatabaseAndDuplicates) {
  DescriptorDatabase db;
  const auto q = MakeGlobalDescriptor(std::vector<float>{1, 0});
  EXPECT_EQ(CodeOf([&] { Rank(q, db, 1); }), ErrorCode::kEmptyDatabase);
  db.Add("a", q);
  EXPECT_THROW(db.Add("a", q), Error);
  EXPECT_EQ(CodeOf([&] { db.Add("b", MakeGlobalDescriptor(std::vector<float>{1, 0, 0})); }),
            ErrorCode::kDimensionMismatch);
}

}  // namespace
}  // namespace s2d
