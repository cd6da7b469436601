#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "sam/cluster_quality.hpp"

namespace {

TEST(Dbi, TwoClusterHandCase) {
  const auto x = sam::Matrix<double>::from_rows({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  const auto p = sam::make_partition({0, 0, 1, 1});
  EXPECT_NEAR(sam::dbi(x, p), 0.1, 1e-12);
}

TEST(Dbi, SingletonsHaveZeroIndex) {
  const auto x = sam::Matrix<double>::from_rows({{0, 0}, {3, 4}});
  EXPECT_EQ(sam::dbi(x, sam::make_partition({0, 1})), 0.0);
}

TEST(Dbi, Errors) {
  const auto x = sam::Matrix<double>::from_rows({{0, 0}, {1, 0}, {-1, 0}, {5, 5}});
  EXPECT_THROW(sam::dbi(x, sam::make_partition({0, 0, 0, 0})), sam::ValidationError);
  // Clusters {1, -1} and {0} share the centroid at the origin.
  EXPECT_THROW(sam::dbi(x, sam::make_partition({0, 1, 1, 2})), sam::NumericError);
  EXPECT_THROW(sam::dbi(x, sam::make_partition({0, 1})), sam::ValidationError);
}

TEST(Dbi, MatchesDirectFormula) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = oracle::random_matrix(50, 1 + rng() % 5, rng);
    const std::size_t k = 2 + rng() % 8;
    std::vector<std::size_t> assign(50);
    for (std::size_t i = 0; i < 50; ++i) assign[i] = i < k ? i : rng() % k;
    std::shuffle(assign.begin(), assign.end(), rng);
    EXPECT_NEAR(sam::dbi(x, sam::make_partition(assign)), oracle::dbi(x, assign), 1e-9);
  }
}

TEST(Dbi, ScaleAndTranslationInvariant) {
  std::mt19937_64 rng(42);
  const auto x = oracle::random_matrix(40, 3, rng);
  std::vector<std::size_t> assign(40);
  for (std::size_t i = 0; i < 40; ++i) assign[i] = i % 4;
  const auto p = sam::make_partition(assign);
  auto scaled = x;
  auto shifted = x;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      scaled(i, j) *= 7.5;
      shifted(i, j) += 100.0 * (j + 1);
    }
  EXPECT_NEAR(sam::dbi(scaled, p), sam::dbi(x, p), 1e-9);
  EXPECT_NEAR(sam::dbi(shifted, p), sam::dbi(x, p), 1e-9);
}

TEST(Dbi, ShrinkingBlobsLowersIndex) {
  std::mt19937_64 rng(43);
  const auto blobs = oracle::make_blobs(3, 20, 3, 5.0, 1.0, rng);
  const auto p = sam::make_partition(blobs.blob);
  // Pull every point halfway toward its blob centroid.
  std::vector<std::vector<double>> c(3, std::vector<double>(3, 0.0));
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 3; ++j) c[blobs.blob[i]][j] += blobs.x(i, j) / 20.0;
  auto shrunk = blobs.x;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      shrunk(i, j) = c[blobs.blob[i]][j] + 0.5 * (blobs.x(i, j) - c[blobs.blob[i]][j]);
  EXPECT_LT(sam::dbi(shrunk, p), sam::dbi(blobs.x, p));
  EXPECT_NEAR(sam::dbi(shrunk, p), 0.5 * sam::dbi(blobs.x, p), 1e-9);
}

TEST(DbiCurve, MinimumAtTrueBlobCount) {
  std::mt19937_64 rng(44);
  const auto blobs = oracle::make_blobs(4, 15, 4, 30.0, 1.0, rng);
  const auto d = sam::ward_linkage(blobs.x);
  const auto curve = sam::dbi_curve(blobs.x, d, {2, 3, 4, 5, 6, 7, 8, 10, 12});
  const auto best = std::min_element(curve.points.begin(), curve.points.end(),
                                     [](auto& a, auto& b) { return a.value < b.value; });
  EXPECT_EQ(best->k, 4u);
  for (const auto& p : curve.points) EXPECT_GE(p.value, 0.0);
}

TEST(DbiCurve, SymmetricLatticeGivesConstantArea) {
  // Four identical pairs at the corners of a large square. At k = 4 every
  // cluster has dispersion e and its nearest neighbour sits at distance L.
  const double L = 100.0, e = 0.5;
  std::vector<std::vector<double>> rows;
  for (double cx : {0.0, L})
    for (double cy : {0.0, L}) {
      rows.push_back({cx - e, cy});
      rows.push_back({cx + e, cy});
    }
  const auto x = sam::Matrix<double>::from_rows(rows);
  const auto d = sam::ward_linkage(x);
  const double at4 = sam::dbi(x, sam::cut(d, 4));
  EXPECT_NEAR(at4, 2 * e / L, 1e-12);
  const auto curve = sam::dbi_curve(x, d, {4, 8});
  EXPECT_NEAR(curve.points[0].value, at4, 1e-15);
  EXPECT_EQ(curve.points[1].value, 0.0);
  EXPECT_NEAR(curve.area, at4 / 2.0, 1e-12);
}

TEST(DbiCurve, ConstantCurveAreaEqualsTheConstant) {
  // Rescaling the whole lattice leaves the index unchanged at every k, so a
  // grid over copies at growing scale is flat. Here the flat curve is built
  // from the same k on scaled inputs and integrated directly.
  const auto base = sam::Matrix<double>::from_rows({{0, 0}, {0, 1}, {10, 0}, {10, 1}, {0, 10}, {0, 11}});
  const auto p = sam::make_partition({0, 0, 1, 1, 2, 2});
  std::vector<sam::CurvePoint> flat;
  for (std::size_t s = 1; s <= 4; ++s) {
    auto x = base;
    for (auto& v : x.values()) v *= static_cast<double>(s);
    flat.push_back({s + 1, sam::dbi(x, p)});
  }
  for (const auto& q : flat) EXPECT_NEAR(q.value, flat.front().value, 1e-12);
  EXPECT_NEAR(sam::sam_area(flat), flat.front().value, 1e-12);
}

TEST(DbiCurve, Errors) {
  std::mt19937_64 rng(45);
  const auto x = oracle::random_matrix(10, 2, rng);
  const auto d = sam::ward_linkage(x);
  EXPECT_THROW(sam::dbi_curve(x, d, {2}), sam::ValidationError);
  EXPECT_THROW(sam::dbi_curve(x, d, {1, 2, 3}), sam::ValidationError);
  EXPECT_THROW(sam::dbi_curve(x, d, {2, 11}), sam::ValidationError);
}

TEST(DbiCurve, CsvRowForHandFixture) {
  const auto x = sam::Matrix<double>::from_rows({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  const auto curve = sam::dbi_curve(x, sam::ward_linkage(x), {2, 3, 4});
  EXPECT_EQ(curve.to_csv().substr(0, 12), "k,dbi\n2,0.1\n");
}

}  // namespace
