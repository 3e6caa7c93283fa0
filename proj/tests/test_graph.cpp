#include <gtest/gtest.h>

#include <functional>

#include "fixtures.hpp"

using namespace lofpc;

namespace {

ComparisonGraph single(int K, const std::vector<std::tuple<int, int, double>>& rows) {
  GraphBuilder b(K);
  for (auto [i, j, y] : rows) b.add(i, j, y);
  return b.build();
}

ComparisonGraph counts_only(int K, const std::vector<std::tuple<int, int, int>>& ec) {
  return fx::with_counts(K, ec, PreferenceProfile::zero(K), 0.0, 1);
}

/// Largest bottleneck over all spanning trees, by enumerating edge subsets.
int exhaustive_bottleneck(const ComparisonGraph& g) {
  const auto& E = g.edges();
  const int K = g.K();
  int best = 0;
  std::vector<int> pick;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (static_cast<int>(pick.size()) == K - 1) {
      UnionFind uf(K);
      int mn = std::numeric_limits<int>::max();
      for (int p : pick) {
        if (!uf.unite(E[static_cast<std::size_t>(p)].i, E[static_cast<std::size_t>(p)].j)) return;
        mn = std::min(mn, E[static_cast<std::size_t>(p)].n);
      }
      best = std::max(best, mn);
      return;
    }
    for (std::size_t a = start; a < E.size(); ++a) {
      pick.push_back(static_cast<int>(a));
      rec(a + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace

TEST(Pairs, LexicographicIndex) {
  const auto pl = pair_list(4);
  ASSERT_EQ(pl.size(), 6u);
  for (std::size_t p = 0; p < pl.size(); ++p) EXPECT_EQ(pair_index(pl[p].first, pl[p].second, 4), p);
  EXPECT_EQ(pl[0], std::make_pair(0, 1));
  EXPECT_EQ(pl[3], std::make_pair(1, 2));
}

TEST(Graph, ReversedPairIsNegated) {
  const auto g = single(3, {{2, 0, 1.5}, {0, 2, 2.0}});
  ASSERT_EQ(g.count(0, 2), 2);
  const auto s = g.samples(0, 2);
  EXPECT_DOUBLE_EQ(s[0], -1.5);
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  EXPECT_EQ(g.total_n(), 2);
}

TEST(Graph, BuilderRejectsBadItems) {
  GraphBuilder b(3);
  EXPECT_ERRC(b.add(0, 0, 1.0), Errc::InvalidArgument);
  EXPECT_ERRC(b.add(0, 3, 1.0), Errc::IndexOutOfRange);
  EXPECT_ERRC(b.add(-1, 1, 1.0), Errc::IndexOutOfRange);
}

TEST(Graph, Connectivity) {
  const auto g = counts_only(5, {{0, 1, 1}, {1, 2, 1}, {3, 4, 2}});
  EXPECT_EQ(g.components(), 2);
  EXPECT_FALSE(g.connected());
  EXPECT_EQ(g.component_of()[2], g.component_of()[0]);
  EXPECT_NE(g.component_of()[3], g.component_of()[0]);
  EXPECT_ERRC(lse_fit(g), Errc::DisconnectedGraph);
  EXPECT_ERRC(bottleneck_spanning_tree(g), Errc::DisconnectedGraph);
}

TEST(Laplacian, UnitTriangle) {
  const Matrix n = laplacian(fx::complete(3));
  Matrix e(3, 3);
  e << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  EXPECT_EQ(n, e);
}

TEST(Laplacian, MissingEdge) {
  const Matrix n = laplacian(counts_only(3, {{0, 1, 2}, {1, 2, 1}}));
  Matrix e(3, 3);
  e << 2, -2, 0, -2, 3, -1, 0, -1, 1;
  EXPECT_EQ(n, e);
}

TEST(Laplacian, PathHasSimpleZero) {
  const Matrix n = laplacian(fx::path(4, 5));
  EXPECT_LT(n.rowwise().sum().norm(), 1e-15);
  const auto sf = sym_eig(n);
  EXPECT_EQ(sf.rank, 3);
  EXPECT_NEAR(sf.eigenvalues(3), 0.0, 1e-12);
}

TEST(LseFit, TwoItems) {
  const auto f = lse_fit(single(2, {{0, 1, 3.0}, {0, 1, 5.0}}));
  EXPECT_NEAR(f.mu_hat(0), 2.0, 1e-14);
  EXPECT_NEAR(f.mu_hat(1), -2.0, 1e-14);
  EXPECT_NEAR(*f.sigma2_hat, 2.0, 1e-14);
  EXPECT_EQ(f.m_bottleneck, 2);
}

TEST(LseFit, Triangle) {
  const auto f = lse_fit(single(3, {{0, 1, 1.0}, {0, 2, 2.0}, {1, 2, 1.0}}));
  EXPECT_NEAR(f.mu_hat(0), 1.0, 1e-14);
  EXPECT_NEAR(f.mu_hat(1), 0.0, 1e-14);
  EXPECT_NEAR(f.mu_hat(2), -1.0, 1e-14);
  EXPECT_FALSE(f.sigma2_hat.has_value());
}

TEST(LseFit, MatchesLaplacianPseudoinverse) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = fx::random_connected(7, 0.4, 4, seed);
    const Vector mu = lse_fit(g).mu_hat;
    const Vector ref = pinv(laplacian(g)) * score_vector(g);
    EXPECT_LT((mu - ref).norm(), 1e-10);
    EXPECT_NEAR(mu.sum(), 0.0, 1e-12);
  }
}

TEST(LseFit, PerfectFitRecoversMerits) {
  Vector mu(5);
  mu << 3, 1, 0, -1, -3;  // sum zero
  const PreferenceProfile nu = linear_profile(mu);
  const auto g = fx::random_connected(5, 0.5, 3, 4, &nu, 0.0);
  const auto f = lse_fit(g);
  EXPECT_LT((f.mu_hat - mu).norm(), 1e-12);
  for (const auto& e : g.edges()) EXPECT_NEAR(f.nu(e.i, e.j), f.mu_hat(e.i) - f.mu_hat(e.j), 1e-12);
}

TEST(LseFit, NonEdgeRaises) {
  const auto f = lse_fit(fx::path(3, 2));
  EXPECT_ERRC(f.nu(0, 2), Errc::NoEdge);
  EXPECT_NO_THROW(f.nu(1, 0));
}

TEST(Decompose, LinearProfileHasNoCycle) {
  Vector mu(3);
  mu << 1, 0, -1;
  const auto d = decompose(linear_profile(mu));
  EXPECT_LT(d.cyclic.values.norm(), 1e-14);
}

TEST(Decompose, TriadIsPurelyCyclic) {
  const auto c = triad_vector(0, 1, 2, 3);
  const auto d = decompose(c);
  EXPECT_LT(d.linear.values.norm(), 1e-14);
  EXPECT_LT((d.cyclic.values - c.values).norm(), 1e-14);
}

TEST(Decompose, RoundTripK4) {
  Vector mu(4);
  mu << 0.3, -1.2, 2.0, 0.7;
  const auto c = triad_vector(0, 1, 2, 4);
  PreferenceProfile nu(4, linear_profile(mu).values + c.values);
  const auto d = decompose(nu);
  EXPECT_LT((d.cyclic.values - c.values).norm(), 1e-12);
  Vector centered = mu.array() - mu.mean();
  EXPECT_LT((d.linear.values - linear_profile(centered).values).norm(), 1e-12);
}

TEST(Decompose, OrthogonalAndIdempotent) {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> z;
  for (int K = 3; K <= 12; ++K) {
    PreferenceProfile nu = PreferenceProfile::zero(K);
    for (Index p = 0; p < nu.values.size(); ++p) nu.values(p) = z(eng);
    const auto d = decompose(nu);
    EXPECT_LE(std::abs(d.linear.values.dot(d.cyclic.values)), 1e-10 * nu.values.squaredNorm());
    const auto d2 = decompose(d.linear);
    EXPECT_LE((d2.linear.values - d.linear.values).norm(), 1e-10 * std::max(1.0, d.linear.values.norm()));
    EXPECT_LT(incidence_transpose_apply(d.cyclic).norm(), 1e-10);
  }
}

TEST(Incidence, SpectralIdentity) {
  for (int K = 3; K <= 8; ++K) {
    const Matrix b = incidence_matrix(K);
    const Matrix g = b * b.transpose();
    EXPECT_LT((g * g - K * g).norm(), 1e-10);
    EXPECT_LT((b * Vector::Ones(K)).norm(), 1e-15);
    const auto sf = sym_eig(g);
    EXPECT_EQ(sf.rank, K - 1);
    for (Index i = 0; i < K - 1; ++i) EXPECT_NEAR(sf.eigenvalues(i), K, 1e-10);
    // Each row has exactly one +1 and one -1.
    for (Index r = 0; r < b.rows(); ++r) {
      EXPECT_EQ((b.row(r).array() == 1.0).count(), 1);
      EXPECT_EQ((b.row(r).array() == -1.0).count(), 1);
    }
  }
}

TEST(Incidence, ResidualProjector) {
  // B has integer entries, so H = I - BBᵀ/K is exact in dyadic cases; K=4, 8.
  for (int K : {4, 8}) {
    const Matrix b = incidence_matrix(K);
    const Index n = b.rows();
    const Matrix h = Matrix::Identity(n, n) - b * b.transpose() / static_cast<double>(K);
    EXPECT_TRUE(Matrix(h * h) == h);
    EXPECT_TRUE(Matrix(h * b) == Matrix::Zero(n, K));
  }
  for (int K : {3, 5, 6, 7}) {
    const Matrix b = incidence_matrix(K);
    const Index n = b.rows();
    const Matrix h = Matrix::Identity(n, n) - b * b.transpose() / static_cast<double>(K);
    EXPECT_LT((h * h - h).norm(), 1e-14);
    EXPECT_LT((h * b).norm(), 1e-14);
  }
}

TEST(Triad, Entries) {
  const auto c3 = triad_vector(0, 1, 2, 3);
  EXPECT_EQ(c3.values(0), 1.0);   // (1,2)
  EXPECT_EQ(c3.values(1), -1.0);  // (1,3)
  EXPECT_EQ(c3.values(2), 1.0);   // (2,3)
  const auto c4 = triad_vector(0, 1, 2, 4);
  Vector e(6);
  e << 1, -1, 0, 1, 0, 0;
  EXPECT_EQ(c4.values, e);
  for (int K = 3; K <= 7; ++K)
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j)
        for (int k = j + 1; k < K; ++k) {
          const auto c = triad_vector(i, j, k, K);
          EXPECT_EQ(c.values.squaredNorm(), 3.0);
          EXPECT_EQ(incidence_transpose_apply(c).norm(), 0.0);
        }
}

TEST(Triad, RangeChecked) {
  EXPECT_ERRC(triad_vector(0, 1, 3, 3), Errc::IndexOutOfRange);
  EXPECT_ERRC(triad_vector(1, 0, 2, 3), Errc::IndexOutOfRange);
}

TEST(PsiSquared, Values) {
  EXPECT_EQ(psi_squared(PreferenceProfile::zero(5)), 0.0);
  EXPECT_DOUBLE_EQ(psi_squared(triad_vector(0, 1, 2, 3)), 1.0);
  PreferenceProfile nu(30, triad_vector(0, 1, 2, 30).values + triad_vector(0, 1, 3, 30).values);
  // Shared edge (1,2) carries 2, four other entries carry magnitude 1.
  EXPECT_DOUBLE_EQ(psi_squared(nu), 8.0 / 435.0);
  EXPECT_DOUBLE_EQ(nu.values.dot(nu.values), 8.0);
}

TEST(Bottleneck, TriangleExample) {
  const auto t = bottleneck_spanning_tree(counts_only(3, {{0, 1, 5}, {0, 2, 1}, {1, 2, 5}}));
  EXPECT_EQ(t.m, 5);
  const std::vector<std::pair<int, int>> e{{0, 1}, {1, 2}};
  EXPECT_EQ(t.edges, e);
}

TEST(Bottleneck, TreeAndUniform) {
  EXPECT_EQ(bottleneck_spanning_tree(counts_only(4, {{0, 1, 4}, {1, 2, 2}, {1, 3, 9}})).m, 2);
  EXPECT_EQ(bottleneck_spanning_tree(fx::complete(4, 7)).m, 7);
}

TEST(Bottleneck, MatchesEnumeration) {
  for (int K = 2; K <= 6; ++K)
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
      const auto g = fx::random_connected(K, 0.5, 9, seed * 31 + K);
      const auto t = bottleneck_spanning_tree(g);
      EXPECT_EQ(t.m, exhaustive_bottleneck(g)) << "K=" << K << " seed=" << seed;
      EXPECT_EQ(static_cast<int>(t.edges.size()), K - 1);
    }
}

TEST(InconsistentTriads, Examples) {
  Vector mu(4);
  mu << 1, 2, 3, 4;
  EXPECT_TRUE(inconsistent_triads(linear_profile(mu), full_mask(4)).empty());
  const auto c = triad_vector(0, 1, 2, 3);
  const auto r = inconsistent_triads(c, full_mask(3));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].triad.i, 0);
  EXPECT_EQ(r[0].triad.k, 2);
  EXPECT_DOUBLE_EQ(r[0].sum, 3.0);
  auto mask = full_mask(3);
  mask[pair_index(1, 2, 3)] = false;
  EXPECT_TRUE(inconsistent_triads(c, mask).empty());
}

TEST(InducedSubgraph, RelabelsAndKeepsSamples) {
  const auto g = single(4, {{0, 3, 1.0}, {3, 1, 2.0}, {0, 1, 4.0}, {2, 3, 5.0}});
  const auto s = induced_subgraph(g, {1, 3});
  EXPECT_EQ(s.K(), 2);
  ASSERT_EQ(s.count(0, 1), 1);
  EXPECT_DOUBLE_EQ(s.samples(0, 1)[0], -2.0);
}
