#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "chunkstitch/error.hpp"
#include "chunkstitch/loop_detection.hpp"
#include "test_support.hpp"

using namespace chunkstitch;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidSpec;
}

// Cyclic Jacobi eigenvalue iteration, slow but independent of Eigen's solver.
void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const Eigen::Index n = a.rows();
  vectors = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * a(p, q), a(q, q) - a(p, p));
        const double c = std::cos(theta), s = std::sin(theta);
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = vectors(k, p), vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  values = a.diagonal();
}

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Eigen::MatrixXd normalize_rows(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

// Literal greedy suppression over a full enumeration, for comparison.
std::vector<LoopCandidate> nms_oracle(const Eigen::MatrixXd& sim, double thr, std::int64_t gap, std::int64_t radius) {
  std::vector<LoopCandidate> all;
  for (std::int64_t i = 0; i < sim.rows(); ++i)
    for (std::int64_t j = 0; j < sim.rows(); ++j)
      if (i < j && j - i >= gap && sim(i, j) >= thr) all.push_back({i, j, sim(i, j)});
  std::vector<LoopCandidate> kept;
  while (!all.empty()) {
    auto best = all.begin();
    for (auto it = all.begin(); it != all.end(); ++it) {
      if (it->similarity > best->similarity ||
          (it->similarity == best->similarity &&
           (it->frame_i < best->frame_i || (it->frame_i == best->frame_i && it->frame_j < best->frame_j)))) {
        best = it;
      }
    }
    const LoopCandidate b = *best;
    kept.push_back(b);
    std::vector<LoopCandidate> rest;
    for (const auto& c : all) {
      if (std::max(std::abs(c.frame_i - b.frame_i), std::abs(c.frame_j - b.frame_j)) > radius) rest.push_back(c);
    }
    all = rest;
  }
  return kept;
}

}  // namespace

TEST(PoolTokens, Examples) {
  Eigen::MatrixXd x(1, 3);
  x << 3, 0, 4;
  EXPECT_LT((pool_tokens(x) - Eigen::Vector3d(0.6, 0, 0.8)).norm(), 1e-15);
  Eigen::MatrixXd copies = x.replicate(5, 1);
  EXPECT_LT((pool_tokens(copies) - pool_tokens(x)).norm(), 1e-15);
  Eigen::MatrixXd e(2, 3);
  e << 1, 0, 0, 0, 1, 0;
  EXPECT_LT((pool_tokens(e) - Eigen::Vector3d(0.5, 0.5, 0)).norm(), 1e-15);
}

TEST(PoolTokens, ZeroToken) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 4);
  x.row(1).setZero();
  EXPECT_EQ(code_of([&] { pool_tokens(x); }), ErrorCode::ZeroToken);
}

TEST(SignedPower, Examples) {
  Eigen::VectorXd g(2);
  g << 0.25, -0.09;
  const Eigen::VectorXd out = signed_power(g, 0.5);
  const Eigen::Vector2d raw(0.5, -0.3);
  EXPECT_LT((out - raw / raw.norm()).norm(), 1e-15);
  EXPECT_NEAR(out.norm(), 1.0, 1e-15);
  EXPECT_EQ(code_of([] { signed_power(Eigen::VectorXd::Zero(4), 0.5); }), ErrorCode::ZeroVector);
}

TEST(Descriptor, FrameScaleInvariant) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd tokens = gaussian_matrix(rng, 16, 32);
  const Eigen::MatrixXd scaled = 7.5 * tokens;
  const Eigen::MatrixXd a = frame_descriptors({&tokens}, 0.5), b = frame_descriptors({&scaled}, 0.5);
  EXPECT_LT((a - b).norm(), 1e-14);
}

TEST(Whitening, IsotropicMatchesJacobiOracle) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd g = normalize_rows(gaussian_matrix(rng, 50, 8));
  const WhiteningModel m = fit_whitening(g, 0, 8);
  // Whitened training covariance is the identity.
  Eigen::MatrixXd z(50, 8);
  for (int i = 0; i < 50; ++i) z.row(i) = (m.projection.transpose() * (g.row(i).transpose() - m.mean)).transpose();
  const Eigen::MatrixXd cov = z.transpose() * z / 50.0;
  EXPECT_LT((cov - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-9);

  const Eigen::RowVectorXd mu = g.colwise().mean();
  const Eigen::MatrixXd c = g.rowwise() - mu;
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  jacobi_eigen(c.transpose() * c / 50.0, values, vectors);
  std::vector<int> order(8);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return values(a) > values(b); });
  for (int k = 0; k < 8; ++k) {
    EXPECT_NEAR(m.eigenvalues(k), values(order[k]), 1e-12);
    const Eigen::VectorXd q = m.projection.col(k) * std::sqrt(m.eigenvalues(k));
    EXPECT_NEAR(std::abs(q.dot(vectors.col(order[k]))), 1.0, 1e-9);
  }
}

TEST(Whitening, DominantDirectionRemoved) {
  std::mt19937_64 rng(3);
  const int d = 12, n = 80;
  Eigen::VectorXd c = gaussian_matrix(rng, d, 1).col(0);
  c.normalize();
  // Rows alpha_i c + eps_i with eps orthogonal to c and uncorrelated with
  // alpha, so c is an exact principal direction of the sample covariance.
  Eigen::VectorXd alpha = (gaussian_matrix(rng, n, 1, 0.5).array() + 1.0).matrix().col(0);
  Eigen::MatrixXd eps = gaussian_matrix(rng, n, d, 0.05);
  eps -= (eps * c) * c.transpose();
  eps = eps.rowwise() - eps.colwise().mean();
  const Eigen::VectorXd a = alpha.array() - alpha.mean();
  eps -= a * (a.transpose() * eps) / a.squaredNorm();
  const Eigen::MatrixXd g = alpha * c.transpose() + eps;
  const WhiteningModel m = fit_whitening(g, 1, 6);
  EXPECT_LT((m.projection.transpose() * c).norm(), 1e-6 * c.norm());
  const WhiteningModel keep = fit_whitening(g, 0, 6);
  EXPECT_GT((keep.projection.transpose() * c).norm(), 1.0);
}

TEST(Whitening, Errors) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(20, 6) / std::sqrt(6.0);
  EXPECT_EQ(code_of([&] { fit_whitening(same, 0, 3); }), ErrorCode::RankDeficient);
  const Eigen::MatrixXd g = normalize_rows(gaussian_matrix(rng, 5, 6));
  EXPECT_EQ(code_of([&] { fit_whitening(g, 1, 4); }), ErrorCode::TooFewFrames);
  EXPECT_EQ(code_of([&] { fit_whitening(g, 1, 6); }), ErrorCode::InvalidSpec);
}

TEST(Whitening, CentersTrainingData) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd g = normalize_rows(gaussian_matrix(rng, 100, 16).array() + 2.0);
  const WhiteningModel m = fit_whitening(g, 1, 10);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(10);
  for (int i = 0; i < 100; ++i) sum += m.projection.transpose() * (g.row(i).transpose() - m.mean);
  EXPECT_LT((sum / 100.0).norm(), 1e-8);
}

TEST(ApplyWhitening, ToyModelAxes) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd g = normalize_rows(gaussian_matrix(rng, 40, 8));
  const WhiteningModel m = fit_whitening(g, 0, 4);
  EXPECT_EQ(code_of([&] { apply_whitening(m.mean, m); }), ErrorCode::ZeroProjection);
  for (int k = 0; k < 4; ++k) {
    const Eigen::VectorXd q = m.projection.col(k) * std::sqrt(m.eigenvalues(k));
    for (double alpha : {0.01, 1.0, 30.0}) {
      const Eigen::VectorXd z = apply_whitening(m.mean + alpha * q, m);
      EXPECT_LT((z - Eigen::VectorXd::Unit(4, k)).norm(), 1e-9);
    }
  }
  const Eigen::VectorXd r = g.row(3).transpose() - m.mean;
  EXPECT_LT((apply_whitening(m.mean + r, m) - apply_whitening(m.mean + 2.5 * r, m)).norm(), 1e-14);
  EXPECT_EQ(code_of([&] { apply_whitening(Eigen::VectorXd::Ones(5), m); }), ErrorCode::ShapeMismatch);
}

TEST(Similarity, Examples) {
  EXPECT_EQ(similarity_matrix(Eigen::MatrixXd::Identity(4, 4)), Eigen::MatrixXd::Identity(4, 4));
  std::mt19937_64 rng(7);
  Eigen::MatrixXd z = normalize_rows(gaussian_matrix(rng, 30, 10));
  z.row(7) = z.row(2);
  const Eigen::MatrixXd s = similarity_matrix(z);
  EXPECT_NEAR(s(2, 7), 1.0, 1e-15);
  for (int i = 0; i < 30; ++i) {
    EXPECT_EQ(s(i, i), 1.0);
    for (int j = 0; j < 30; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 10; ++k) dot += z(i, k) * z(j, k);
      EXPECT_NEAR(s(i, j), dot, 1e-12);
      EXPECT_EQ(s(i, j), s(j, i));
      EXPECT_LE(std::abs(s(i, j)), 1.0);
    }
  }
}

TEST(DetectLoops, Examples) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(400, 400);
  s.diagonal().setOnes();
  s(10, 300) = s(300, 10) = 0.9;
  auto c = detect_loops(s, 0.65, 150, 25);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (LoopCandidate{10, 300, 0.9}));
  s(10, 300) = s(300, 10) = 0.5;
  EXPECT_TRUE(detect_loops(s, 0.65, 150, 25).empty());
}

TEST(DetectLoops, NmsKeepsStrongest) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(600, 600);
  s(100, 500) = s(500, 100) = 0.95;
  s(101, 502) = s(502, 101) = 0.90;
  const auto c = detect_loops(s, 0.65, 150, 5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].frame_i, 100);
  EXPECT_EQ(c[0].frame_j, 500);
}

TEST(DetectLoops, MatchesGreedyOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd s(120, 120);
    for (int i = 0; i < 120; ++i) {
      for (int j = i; j < 120; ++j) {
        // Quantized values force ties through the secondary ordering.
        s(i, j) = s(j, i) = i == j ? 1.0 : std::round(u(rng) * 20.0) / 20.0;
      }
    }
    const auto got = detect_loops(s, 0.6, 20, 4);
    EXPECT_EQ(got, nms_oracle(s, 0.6, 20, 4));
    EXPECT_EQ(got, detect_loops(s, 0.6, 20, 4));
    for (const auto& c : got) {
      EXPECT_LT(c.frame_i, c.frame_j);
      EXPECT_GE(c.frame_j - c.frame_i, 20);
    }
  }
}

TEST(LoopBatch, CentredWindows) {
  const auto b = build_loop_batch(100, 500, 40, 1000);
  ASSERT_EQ(b.size(), 40u);
  for (int k = 0; k < 20; ++k) {
    EXPECT_EQ(b[k], 90 + k);
    EXPECT_EQ(b[20 + k], 490 + k);
  }
}

TEST(LoopBatch, ClampedAtBounds) {
  const auto b = build_loop_batch(2, 998, 40, 1000);
  ASSERT_EQ(b.size(), 40u);
  EXPECT_EQ(b.front(), 0);
  EXPECT_EQ(b[19], 19);
  EXPECT_EQ(b[20], 980);
  EXPECT_EQ(b.back(), 999);
}

TEST(LoopBatch, OverlappingWindowsDeduplicated) {
  const auto b = build_loop_batch(100, 110, 40, 1000);
  EXPECT_LT(b.size(), 40u);
  std::vector<std::int64_t> sorted = b;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(b.front(), 90);
  EXPECT_EQ(b.back(), 119);
  EXPECT_EQ(code_of([] { build_loop_batch(5, 5, 40, 100); }), ErrorCode::InvalidSpec);
}

TEST(LoopSim3, Composition) {
  std::mt19937_64 rng(9);
  const Sim3 a = chunkstitch::testing::random_sim3(rng), b = chunkstitch::testing::random_sim3(rng);
  EXPECT_LT(chunkstitch::testing::max_abs_diff(loop_sim3(Sim3(), b).matrix(), b.matrix()), 1e-15);
  EXPECT_LT(chunkstitch::testing::max_abs_diff(loop_sim3(a, a).matrix(), Mat4::Identity()), 1e-12);
  const Mat4 oracle = b.matrix() * a.matrix().inverse();
  EXPECT_LT(chunkstitch::testing::max_abs_diff(loop_sim3(a, b).matrix(), oracle), 1e-10);
}

TEST(Retrieval, WhiteningSeparatesContaminatedClusters) {
  std::mt19937_64 rng(10);
  const int clusters = 4, per = 25, d = 32;
  Eigen::VectorXd shared = gaussian_matrix(rng, d, 1).col(0);
  shared = 5.0 * shared.normalized();
  const Eigen::MatrixXd centres = gaussian_matrix(rng, clusters, d, 0.3);
  Eigen::MatrixXd g(clusters * per, d);
  for (int c = 0; c < clusters; ++c) {
    for (int k = 0; k < per; ++k) {
      const double strength = 1.0 + 0.3 * gaussian_matrix(rng, 1, 1)(0, 0);
      g.row(c * per + k) = strength * shared.transpose() + centres.row(c) + gaussian_matrix(rng, 1, d, 0.02);
    }
  }
  g = normalize_rows(g);
  const WhiteningModel m = fit_whitening(g, 1, clusters - 1);
  Eigen::MatrixXd z(g.rows(), clusters - 1);
  for (Eigen::Index i = 0; i < g.rows(); ++i) z.row(i) = apply_whitening(g.row(i).transpose(), m).transpose();
  const Eigen::MatrixXd before = similarity_matrix(g), after = similarity_matrix(z);
  double off_before = 0.0, off_after = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.rows(); ++j) {
      if (i / per == j / per) continue;
      off_before += before(i, j);
      off_after += after(i, j);
      ++count;
    }
  }
  EXPECT_LT(off_after / count, off_before / count);
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    Eigen::VectorXd row = after.row(i);
    row(i) = -2.0;
    Eigen::Index best;
    row.maxCoeff(&best);
    EXPECT_EQ(best / per, i / per);
  }
}
