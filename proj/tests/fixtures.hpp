#pragma once

// Small graph builders shared by the unit tests.

#include <random>
#include <vector>

#include "lofpc/lofpc.hpp"

/// Asserts that `stmt` throws lofpc::Error with `expected_code`.
#define EXPECT_ERRC(stmt, expected_code)                                   \
  do {                                                            \
    try {                                                         \
      stmt;                                                       \
      ADD_FAILURE() << "no error thrown by " #stmt;               \
    } catch (const lofpc::Error& e_) {                            \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                 \
    }                                                             \
  } while (0)

namespace fx {

using namespace lofpc;

/// Every pair of K items with m zero outcomes.
inline ComparisonGraph complete(int K, int m = 1, double y = 0.0) {
  GraphBuilder b(K);
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j)
      for (int k = 0; k < m; ++k) b.add(i, j, y);
  return b.build();
}

/// Graph with the given (i, j, n) counts; outcomes drawn as ν_ij + σ z.
inline ComparisonGraph with_counts(int K, const std::vector<std::tuple<int, int, int>>& ec,
                                   const PreferenceProfile& nu, double sigma, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  GraphBuilder b(K);
  for (auto [i, j, n] : ec)
    for (int k = 0; k < n; ++k) b.add(i, j, nu(i, j) + sigma * z(eng));
  return b.build();
}

/// Star centered at item 0.
inline ComparisonGraph star(int K, int m = 3, std::uint64_t seed = 1) {
  std::vector<std::tuple<int, int, int>> ec;
  for (int j = 1; j < K; ++j) ec.emplace_back(0, j, m);
  return with_counts(K, ec, PreferenceProfile::zero(K), 1.0, seed);
}

/// Path 0-1-...-(K-1).
inline ComparisonGraph path(int K, int m = 3, std::uint64_t seed = 1) {
  std::vector<std::tuple<int, int, int>> ec;
  for (int j = 1; j < K; ++j) ec.emplace_back(j - 1, j, m);
  return with_counts(K, ec, PreferenceProfile::zero(K), 1.0, seed);
}

/// Random connected graph: a random spanning tree plus each other pair with
/// probability p, counts uniform on [1, max_n].
inline ComparisonGraph random_connected(int K, double p, int max_n, std::uint64_t seed,
                                        const PreferenceProfile* nu = nullptr, double sigma = 1.0) {
  std::mt19937_64 eng(seed);
  std::uniform_int_distribution<int> cnt(1, max_n);
  std::bernoulli_distribution add(p);
  std::vector<int> n(n_pairs(K), 0);
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), eng);
  for (int a = 1; a < K; ++a) {
    std::uniform_int_distribution<int> parent(0, a - 1);
    int i = perm[static_cast<std::size_t>(a)], j = perm[static_cast<std::size_t>(parent(eng))];
    if (i > j) std::swap(i, j);
    n[pair_index(i, j, K)] = cnt(eng);
  }
  for (auto& x : n)
    if (x == 0 && add(eng)) x = cnt(eng);
  std::vector<std::tuple<int, int, int>> ec;
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j)
      if (n[pair_index(i, j, K)]) ec.emplace_back(i, j, n[pair_index(i, j, K)]);
  const PreferenceProfile zero = PreferenceProfile::zero(K);
  return with_counts(K, ec, nu ? *nu : zero, sigma, seed + 17);
}

/// Random PSD matrix of the given rank.
inline Matrix random_psd(Index n, Index rank, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  Matrix a(n, rank);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rank; ++j) a(i, j) = z(eng);
  return a * a.transpose();
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double s = std::max(1.0, b.norm());
  return (a - b).norm() / s;
}

/// One-sample Kolmogorov-Smirnov distance against a CDF.
template <class Cdf>
double ks_distance(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace fx
