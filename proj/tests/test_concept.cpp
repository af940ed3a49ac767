#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "fixtures.hpp"

using namespace hgeo;

namespace {

Eigen::MatrixXd gaussian_rows(std::mt19937_64& rng, int n, const Eigen::VectorXd& scale,
                              const Eigen::VectorXd& shift) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, scale.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < scale.size(); ++j) m(i, j) = shift(j) + scale(j) * g(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& rows) {
  const Eigen::MatrixXd c = rows.rowwise() - rows.colwise().mean();
  return c.transpose() * c / static_cast<double>(rows.rows() - 1);
}

ConceptVector with_vector(const Eigen::VectorXd& v) {
  ConceptVector c;
  c.vector = v;
  return c;
}

}  // namespace

TEST(Concept, WhiteningContracts) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = gaussian_rows(rng, 2000, Eigen::Vector2d(2.0, 1.0), Eigen::Vector2d(5.0, -3.0));
  std::vector<std::string> toks;
  for (int i = 0; i < x.rows(); ++i) toks.push_back("w" + std::to_string(i));
  const EmbeddingTable table(toks, x);
  WhiteningTransform w;
  const auto white = center_whiten(table, true, &w);
  EXPECT_EQ(white.preprocessing(), Preprocessing::CenteredWhitened);
  EXPECT_LT(white.rows().colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((covariance(white.rows()) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-6);
  // Oracle: inverse square root of the sample covariance of a 2x2 matrix.
  const Eigen::Matrix2d s = covariance(x);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
  const Eigen::Matrix2d inv_sqrt = es.operatorInverseSqrt();
  EXPECT_LT((w.transform - inv_sqrt).cwiseAbs().maxCoeff(), 1e-10);

  const auto centered = center_whiten(table, false);
  EXPECT_EQ(centered.preprocessing(), Preprocessing::Centered);
  EXPECT_LT((covariance(centered.rows()) - s).cwiseAbs().maxCoeff(), 1e-10);

  // Rank deficient: second column duplicates the first.
  Eigen::MatrixXd dup(50, 2);
  dup.col(0) = x.col(0).head(50);
  dup.col(1) = x.col(0).head(50);
  const auto wd = fit_whitening(dup);
  EXPECT_TRUE(wd.transform.allFinite());
  EXPECT_TRUE(wd.apply(dup).allFinite());
  EXPECT_THROW(fit_whitening(Eigen::MatrixXd::Ones(1, 3)), InputError);
}

TEST(Concept, WhitenThenSubsetEqualsFrozenTransform) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = gaussian_rows(rng, 300, Eigen::Vector3d(1.0, 3.0, 0.5), Eigen::Vector3d(1, 2, 3));
  WhiteningTransform w;
  std::vector<std::string> toks;
  for (int i = 0; i < x.rows(); ++i) toks.push_back("w" + std::to_string(i));
  const auto white = center_whiten(EmbeddingTable(toks, x), true, &w);
  const std::vector<int> subset{3, 17, 42, 299};
  for (int i : subset) {
    const Eigen::MatrixXd one = w.apply(x.row(i));
    EXPECT_LT((one - white.rows().row(i)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Concept, IsotropicCaseReducesToMean) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd y = gaussian_rows(rng, 40, Eigen::VectorXd::Constant(6, 0.7), Eigen::VectorXd::LinSpaced(6, -1, 2));
  const auto cv = estimate_concept_vector(y, {ShrinkageMode::Fixed, 1.0});
  const Eigen::VectorXd mu = y.colwise().mean().transpose();
  EXPECT_LT((cv.vector - mu).norm(), 1e-10);
  EXPECT_NEAR(cv.direction.norm(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(cv.shrinkage, 1.0);

  // Exactly isotropic sample covariance: symmetric +-e_k cloud around mu.
  Eigen::MatrixXd sym(12, 6);
  for (int k = 0; k < 6; ++k) {
    sym.row(2 * k) = mu.transpose() + Eigen::RowVectorXd::Unit(6, k);
    sym.row(2 * k + 1) = mu.transpose() - Eigen::RowVectorXd::Unit(6, k);
  }
  const auto iso = estimate_concept_vector(sym, {ShrinkageMode::None, 0.0});
  EXPECT_LT((iso.vector - mu).norm(), 1e-10);
}

TEST(Concept, AnisotropicToy) {
  // Mean (1, 0), sample covariance proportional to diag(1, 0.01): Sigma^+ mu is along (1, 0).
  Eigen::MatrixXd y(4, 2);
  y << 2, 0, 0, 0, 1, 0.1, 1, -0.1;
  const Eigen::MatrixXd c = y.rowwise() - y.colwise().mean();
  const Eigen::Matrix2d s = c.transpose() * c / 4.0;
  ASSERT_NEAR(s(0, 0), 0.5, 1e-15);
  ASSERT_NEAR(s(1, 1), 0.005, 1e-15);
  ASSERT_NEAR(s(0, 1), 0.0, 1e-15);
  const auto cv = estimate_concept_vector(y, {ShrinkageMode::None, 0.0});
  EXPECT_NEAR(cv.direction(0), 1.0, 1e-12);
  EXPECT_NEAR(cv.direction(1), 0.0, 1e-12);
  EXPECT_NEAR(cv.magnitude, 1.0, 1e-12);

  // Off-axis mean: direction follows Sigma^-1 mu, not mu.
  Eigen::MatrixXd z = y;
  z.col(1).array() += 0.1;
  const auto tilt = estimate_concept_vector(z, {ShrinkageMode::None, 0.0});
  const Eigen::Vector2d expect = Eigen::Vector2d(1.0 / 0.5, 0.1 / 0.005).normalized();
  EXPECT_LT((tilt.direction - expect).norm(), 1e-10);
}

TEST(Concept, RepeatedVectorWithJitter) {
  std::mt19937_64 rng(4);
  const Eigen::Vector3d v(3.0, -1.0, 2.0);
  const Eigen::MatrixXd y = gaussian_rows(rng, 200, Eigen::VectorXd::Constant(3, 1e-6), v);
  const auto cv = estimate_concept_vector(y);
  EXPECT_GT(cv.shrinkage, 0.5);
  EXPECT_GT(cv.direction.dot(v.normalized()), 0.99);
}

TEST(Concept, ZeroMeanAndErrors) {
  Eigen::MatrixXd y(2, 2);
  y << 1, 0, -1, 0;
  EXPECT_TRUE(estimate_concept_vector(y).zero);
  EXPECT_THROW(estimate_concept_vector(Eigen::MatrixXd::Ones(1, 2)), InputError);
  EXPECT_THROW(estimate_concept_vector(y, {ShrinkageMode::Fixed, 1.5}), InputError);
}

TEST(Concept, LedoitWolfIntensityInRange) {
  std::mt19937_64 rng(5);
  for (int n : {3, 10, 100}) {
    const Eigen::MatrixXd y = gaussian_rows(rng, n, Eigen::Vector4d(1, 2, 3, 4), Eigen::Vector4d::Ones());
    const auto cv = estimate_concept_vector(y);
    EXPECT_GE(cv.shrinkage, 0.0);
    EXPECT_LE(cv.shrinkage, 1.0);
  }
}

TEST(Concept, InnovationCosineExamples) {
  const Eigen::Vector3d p(1, 2, 0);
  EXPECT_NEAR(innovation_cosine(with_vector(p + Eigen::Vector3d(2, -1, 5)), with_vector(p)), 0.0, 1e-15);
  EXPECT_NEAR(innovation_cosine(with_vector(2 * p), with_vector(p)), 1.0, 1e-15);
  EXPECT_NEAR(innovation_cosine(with_vector(-p), with_vector(p)), -1.0, 1e-15);
  EXPECT_TRUE(std::isnan(innovation_cosine(with_vector(p), with_vector(p))));
  EXPECT_THROW(innovation_cosine(with_vector(p), with_vector(Eigen::Vector3d::Zero())), InputError);
}

TEST(Concept, InnovationCosineOrthogonalInvariance) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd a(5), b(5);
    for (int k = 0; k < 5; ++k) {
      a(k) = g(rng);
      b(k) = g(rng);
    }
    const Eigen::MatrixXd q = random_orthogonal(rng, 5);
    EXPECT_NEAR(innovation_cosine(with_vector(a), with_vector(b)),
                innovation_cosine(with_vector(q * a), with_vector(q * b)), 1e-12);
  }
}

TEST(Concept, ProjectionSeparation) {
  std::mt19937_64 rng(7);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  const Eigen::MatrixXd train = gaussian_rows(rng, 60, ones, Eigen::VectorXd::Constant(4, 3.0));
  const Eigen::MatrixXd held = gaussian_rows(rng, 60, ones, Eigen::VectorXd::Constant(4, 3.0));
  const Eigen::MatrixXd other = gaussian_rows(rng, 60, ones, Eigen::VectorXd::Zero(4));
  const auto cv = estimate_concept_vector(train);
  EXPECT_GT(projection_separation(cv, held, other).separation, 1.0);
  EXPECT_GT(projection_separation(cv, train, other).mean_heldout, 3.0);
  EXPECT_DOUBLE_EQ(projection_separation(cv, train, train).separation, 0.0);
  EXPECT_THROW(projection_separation(cv, Eigen::MatrixXd(0, 4), other), InputError);
}

TEST(Concept, TrainSplit) {
  Rng rng = make_substream(8);
  const auto [tr, te] = train_split(10, 0.7, rng);
  EXPECT_EQ(tr.size(), 7u);
  EXPECT_EQ(te.size(), 3u);
  std::vector<int> all = tr;
  all.insert(all.end(), te.begin(), te.end());
  std::sort(all.begin(), all.end());
  for (int k = 0; k < 10; ++k) EXPECT_EQ(all[static_cast<std::size_t>(k)], k);
  Rng again = make_substream(8);
  EXPECT_EQ(train_split(10, 0.7, again).first, tr);
  EXPECT_THROW(train_split(10, 0.0, rng), InputError);
}

TEST(Concept, EmbeddingFileLayoutAndRoundTrip) {
  Eigen::MatrixXd m(2, 3);
  m << 1.5, -2, 0.25, 3, 4, 5;
  const EmbeddingTable t({"ab", "c"}, m);
  std::ostringstream os;
  write_embeddings(os, t);
  const std::string bytes = os.str();
  // magic, u64 n, u32 d, (u32 + 2), (u32 + 1), 6 floats
  ASSERT_EQ(bytes.size(), 4u + 8u + 4u + 6u + 5u + 24u);
  EXPECT_EQ(bytes.substr(0, 4), "HGE1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 3u);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 27, 4);
  EXPECT_EQ(first, 1.5f);
  std::istringstream in(bytes);
  const auto back = read_embeddings(in);
  EXPECT_EQ(back.tokens(), t.tokens());
  EXPECT_EQ(back.rows(), m);
  std::istringstream bad("HGE0");
  EXPECT_THROW(read_embeddings(bad), InputError);
  EXPECT_THROW(EmbeddingTable({"a", "a"}, Eigen::MatrixXd::Zero(2, 1)), InputError);
}
