#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lofpc/error.hpp"
#include "lofpc/numerics.hpp"

// Items are 0-based throughout the library. Files and the CLI use 1-based ids.

namespace lofpc {

inline constexpr std::size_t n_pairs(int K) {
  return K < 2 ? 0 : static_cast<std::size_t>(K) * static_cast<std::size_t>(K - 1) / 2;
}

/// Position of pair (i, j), i < j, in lexicographic order.
inline constexpr std::size_t pair_index(int i, int j, int K) {
  const auto ii = static_cast<std::size_t>(i);
  return ii * static_cast<std::size_t>(K) - ii * (ii + 1) / 2 + static_cast<std::size_t>(j - i - 1);
}

/// All pairs in lexicographic order.
inline std::vector<std::pair<int, int>> pair_list(int K) {
  std::vector<std::pair<int, int>> out;
  out.reserve(n_pairs(K));
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) out.emplace_back(i, j);
  return out;
}

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), sets_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
    --sets_;
    return true;
  }
  int sets() const { return sets_; }

 private:
  std::vector<int> parent_;
  int sets_;
};

// ---------------------------------------------------------------------------
// Preference profiles

/// Vector over the pairs (i, j), i < j, in lexicographic order. The (j, i)
/// entry is implied as the negation.
struct PreferenceProfile {
  int K = 0;
  Vector values;

  PreferenceProfile() = default;
  PreferenceProfile(int k, Vector v) : K(k), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != n_pairs(K))
      throw Error(Errc::InvalidArgument, "profile length does not match K");
  }
  static PreferenceProfile zero(int k) {
    return PreferenceProfile(k, Vector::Zero(static_cast<Index>(n_pairs(k))));
  }

  /// Signed entry for any ordered pair i != j.
  double operator()(int i, int j) const {
    return i < j ? values(static_cast<Index>(pair_index(i, j, K)))
                 : -values(static_cast<Index>(pair_index(j, i, K)));
  }
  double& at(int i, int j) { return values(static_cast<Index>(pair_index(i, j, K))); }
  bool defined(int i, int j) const { return !std::isnan((*this)(i, j)); }
};

/// Linear profile ν = Bμ.
inline PreferenceProfile linear_profile(const Vector& mu) {
  const int K = static_cast<int>(mu.size());
  PreferenceProfile p = PreferenceProfile::zero(K);
  Index e = 0;
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) p.values(e++) = mu(i) - mu(j);
  return p;
}

/// Bᵀν: for each item k, Σ_j ν_kj over all j != k.
inline Vector incidence_transpose_apply(const PreferenceProfile& nu) {
  Vector s = Vector::Zero(nu.K);
  Index e = 0;
  for (int i = 0; i < nu.K; ++i)
    for (int j = i + 1; j < nu.K; ++j) {
      s(i) += nu.values(e);
      s(j) -= nu.values(e);
      ++e;
    }
  return s;
}

/// Dense incidence matrix of the complete directed graph, binom(K,2) x K.
inline Matrix incidence_matrix(int K) {
  Matrix b = Matrix::Zero(static_cast<Index>(n_pairs(K)), K);
  Index e = 0;
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) {
      b(e, i) = 1.0;
      b(e, j) = -1.0;
      ++e;
    }
  return b;
}

struct Triad {
  int i, j, k;
  friend bool operator==(const Triad&, const Triad&) = default;
};

inline PreferenceProfile triad_vector(int i, int j, int k, int K) {
  if (!(0 <= i && i < j && j < k && k < K))
    throw Error(Errc::IndexOutOfRange, "triad requires 0 <= i < j < k < K");
  PreferenceProfile c = PreferenceProfile::zero(K);
  c.at(i, j) = 1.0;
  c.at(j, k) = 1.0;
  c.at(i, k) = -1.0;
  return c;
}
inline PreferenceProfile triad_vector(const Triad& t, int K) { return triad_vector(t.i, t.j, t.k, K); }

struct Decomposition {
  PreferenceProfile linear;
  PreferenceProfile cyclic;
};

/// Orthogonal split onto col(B) and its complement. Uses B(BᵀB)⁺Bᵀ = BBᵀ/K,
/// so nothing of size binom(K,3) is ever formed.
inline Decomposition decompose(const PreferenceProfile& nu) {
  const Vector mu = incidence_transpose_apply(nu) / static_cast<double>(nu.K);
  PreferenceProfile lin = linear_profile(mu);
  PreferenceProfile cyc(nu.K, nu.values - lin.values);
  return {std::move(lin), std::move(cyc)};
}

inline double psi_squared(const PreferenceProfile& nu_cyclic) {
  if (nu_cyclic.K < 2) return 0.0;
  return nu_cyclic.values.squaredNorm() / binom2(nu_cyclic.K);
}

/// ν_ij + ν_jk + ν_ki for i < j < k.
inline double cycle_sum(const PreferenceProfile& nu, const Triad& t) {
  return nu(t.i, t.j) + nu(t.j, t.k) - nu(t.i, t.k);
}

struct TriadSum {
  Triad triad;
  double sum;
};

/// Triads with all three pairs in `edge_mask` (indexed by pair_index) and a
/// cycle sum exceeding tol in magnitude.
inline std::vector<TriadSum> inconsistent_triads(const PreferenceProfile& nu,
                                                 const std::vector<bool>& edge_mask,
                                                 double tol = 1e-9) {
  const int K = nu.K;
  if (edge_mask.size() != n_pairs(K))
    throw Error(Errc::InvalidArgument, "edge mask length does not match K");
  std::vector<TriadSum> out;
  auto has = [&](int a, int b) { return edge_mask[pair_index(a, b, K)]; };
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) {
      if (!has(i, j)) continue;
      for (int k = j + 1; k < K; ++k) {
        if (!has(j, k) || !has(i, k)) continue;
        const Triad t{i, j, k};
        const double s = cycle_sum(nu, t);
        if (std::abs(s) > tol) out.push_back({t, s});
      }
    }
  return out;
}

inline std::vector<bool> full_mask(int K) { return std::vector<bool>(n_pairs(K), true); }

// ---------------------------------------------------------------------------
// Comparison graphs

struct Edge {
  int i = 0, j = 0;
  int n = 0;
  double sum = 0.0;
  double mean = 0.0;
  double within_ss = 0.0;  // Σ (Y - mean)²
  std::size_t offset = 0;  // into the flat sample array
};

class GraphBuilder;

/// Items, per-pair samples, and derived edge statistics. Immutable.
class ComparisonGraph {
 public:
  ComparisonGraph() = default;

  int K() const { return K_; }
  long total_n() const { return static_cast<long>(flat_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  /// Position in edges() of pair (i, j) (any order), or -1.
  int edge_pos(int i, int j) const {
    if (i > j) std::swap(i, j);
    return pos_[pair_index(i, j, K_)];
  }
  int count(int i, int j) const {
    const int p = edge_pos(i, j);
    return p < 0 ? 0 : edges_[static_cast<std::size_t>(p)].n;
  }
  /// Samples oriented as i < j.
  std::span<const double> samples(const Edge& e) const {
    return {flat_.data() + e.offset, static_cast<std::size_t>(e.n)};
  }
  std::span<const double> samples(int i, int j) const {
    const int p = edge_pos(i, j);
    if (p < 0) return {};
    return samples(edges_[static_cast<std::size_t>(p)]);
  }
  std::vector<bool> edge_mask() const {
    std::vector<bool> m(n_pairs(K_), false);
    for (const auto& e : edges_) m[pair_index(e.i, e.j, K_)] = true;
    return m;
  }

  int components() const { return components_; }
  bool connected() const { return components_ == 1; }
  /// Smallest item id of each item's component.
  const std::vector<int>& component_of() const { return component_of_; }

  bool is_complete() const { return edges_.size() == n_pairs(K_); }
  /// Common count if every present edge has the same n, else nullopt.
  std::optional<int> constant_count() const {
    if (edges_.empty()) return std::nullopt;
    const int m = edges_.front().n;
    for (const auto& e : edges_)
      if (e.n != m) return std::nullopt;
    return m;
  }

 private:
  friend class GraphBuilder;
  int K_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> pos_;
  std::vector<double> flat_;
  int components_ = 0;
  std::vector<int> component_of_;
};

/// Accumulates comparisons. add(j, i, y) with j > i stores -y under (i, j).
class GraphBuilder {
 public:
  explicit GraphBuilder(int K) : K_(K), per_pair_(n_pairs(K)) {
    if (K < 2) throw Error(Errc::InvalidArgument, "need at least 2 items");
  }

  GraphBuilder& add(int i, int j, double y) {
    if (i < 0 || j < 0 || i >= K_ || j >= K_)
      throw Error(Errc::IndexOutOfRange, "item index out of range");
    if (i == j) throw Error(Errc::InvalidArgument, "self-comparison");
    if (i > j) {
      std::swap(i, j);
      y = -y;
    }
    per_pair_[pair_index(i, j, K_)].push_back(y);
    return *this;
  }

  /// Reserve space for n samples on pair (i, j), i < j.
  void reserve(int i, int j, std::size_t n) { per_pair_[pair_index(i, j, K_)].reserve(n); }

  int K() const { return K_; }

  ComparisonGraph build() const {
    ComparisonGraph g;
    g.K_ = K_;
    g.pos_.assign(per_pair_.size(), -1);
    std::size_t total = 0;
    for (const auto& v : per_pair_) total += v.size();
    g.flat_.reserve(total);
    UnionFind uf(K_);
    std::size_t p = 0;
    for (int i = 0; i < K_; ++i)
      for (int j = i + 1; j < K_; ++j, ++p) {
        const auto& v = per_pair_[p];
        if (v.empty()) continue;
        Edge e;
        e.i = i;
        e.j = j;
        e.n = static_cast<int>(v.size());
        e.offset = g.flat_.size();
        for (double y : v) e.sum += y;
        e.mean = e.sum / e.n;
        for (double y : v) e.within_ss += (y - e.mean) * (y - e.mean);
        g.flat_.insert(g.flat_.end(), v.begin(), v.end());
        g.pos_[p] = static_cast<int>(g.edges_.size());
        g.edges_.push_back(e);
        uf.unite(i, j);
      }
    g.components_ = uf.sets();
    g.component_of_.resize(static_cast<std::size_t>(K_));
    for (int i = 0; i < K_; ++i) g.component_of_[static_cast<std::size_t>(i)] = uf.find(i);
    return g;
  }

 private:
  int K_;
  std::vector<std::vector<double>> per_pair_;
};

/// Subgraph on the listed items (relabelled 0..|items|-1 in the given order).
inline ComparisonGraph induced_subgraph(const ComparisonGraph& g, const std::vector<int>& items) {
  std::vector<int> local(static_cast<std::size_t>(g.K()), -1);
  for (std::size_t a = 0; a < items.size(); ++a) local[static_cast<std::size_t>(items[a])] = static_cast<int>(a);
  GraphBuilder b(static_cast<int>(items.size()));
  for (const auto& e : g.edges()) {
    const int a = local[static_cast<std::size_t>(e.i)], c = local[static_cast<std::size_t>(e.j)];
    if (a < 0 || c < 0) continue;
    for (double y : g.samples(e)) b.add(a, c, y);
  }
  return b.build();
}

inline std::string describe_components(const ComparisonGraph& g) {
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(static_cast<std::size_t>(g.K()), -1);
  for (int i = 0; i < g.K(); ++i) {
    const int r = g.component_of()[static_cast<std::size_t>(i)];
    if (slot[static_cast<std::size_t>(r)] < 0) {
      slot[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[static_cast<std::size_t>(r)])].push_back(i + 1);
  }
  std::string s = std::to_string(groups.size()) + " components:";
  for (const auto& grp : groups) {
    s += " {";
    for (std::size_t a = 0; a < grp.size(); ++a) s += (a ? "," : "") + std::to_string(grp[a]);
    s += "}";
  }
  return s;
}

inline void require_connected(const ComparisonGraph& g) {
  if (!g.connected()) throw Error(Errc::DisconnectedGraph, describe_components(g));
}

// ---------------------------------------------------------------------------
// Least squares

inline Matrix laplacian(const ComparisonGraph& g) {
  Matrix n = Matrix::Zero(g.K(), g.K());
  for (const auto& e : g.edges()) {
    n(e.i, e.i) += e.n;
    n(e.j, e.j) += e.n;
    n(e.i, e.j) -= e.n;
    n(e.j, e.i) -= e.n;
  }
  return n;
}

/// S_i = Σ_j S_ij with S_ji = -S_ij.
inline Vector score_vector(const ComparisonGraph& g) {
  Vector s = Vector::Zero(g.K());
  for (const auto& e : g.edges()) {
    s(e.i) += e.sum;
    s(e.j) -= e.sum;
  }
  return s;
}

/// Weighted sum-zero merit fit: minimizes Σ w (y - (μ_i - μ_j))² with
/// 1ᵀμ = 0. Solves (L + 11ᵀ/K)μ = s, which equals L⁺s for a connected
/// weighted graph because s ⊥ 1.
struct WeightedEdge {
  int i, j;
  double w, y;
};

inline Vector solve_merits(int K, const std::vector<WeightedEdge>& edges) {
  Matrix l = Matrix::Constant(K, K, 1.0 / K);
  Vector s = Vector::Zero(K);
  UnionFind uf(K);
  for (const auto& e : edges) {
    if (!(e.w > 0)) continue;
    l(e.i, e.i) += e.w;
    l(e.j, e.j) += e.w;
    l(e.i, e.j) -= e.w;
    l(e.j, e.i) -= e.w;
    s(e.i) += e.w * e.y;
    s(e.j) -= e.w * e.y;
    uf.unite(e.i, e.j);
  }
  if (uf.sets() != 1) throw Error(Errc::DisconnectedGraph, "merit fit needs a connected graph");
  Eigen::LLT<Matrix> llt(l);
  Vector mu = llt.solve(s);
  mu.array() -= mu.mean();
  return mu;
}

inline std::vector<WeightedEdge> weighted_edges(const ComparisonGraph& g) {
  std::vector<WeightedEdge> out;
  out.reserve(g.edge_count());
  for (const auto& e : g.edges()) out.push_back({e.i, e.j, static_cast<double>(e.n), e.mean});
  return out;
}

/// Merit vector μ̂ = N⁺S. Throws DisconnectedGraph.
inline Vector fit_merits(const ComparisonGraph& g) {
  require_connected(g);
  return solve_merits(g.K(), weighted_edges(g));
}

struct SpanningTree {
  std::vector<std::pair<int, int>> edges;
  int m = 0;
};

/// Maximum spanning tree by count, which maximizes the minimum edge count.
/// Ties are broken by lexicographic pair order.
inline SpanningTree bottleneck_spanning_tree(const ComparisonGraph& g) {
  require_connected(g);
  std::vector<std::size_t> order(g.edge_count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.edges()[a].n > g.edges()[b].n; });
  UnionFind uf(g.K());
  SpanningTree t;
  t.m = std::numeric_limits<int>::max();
  for (std::size_t idx : order) {
    const Edge& e = g.edges()[idx];
    if (uf.unite(e.i, e.j)) {
      t.edges.emplace_back(e.i, e.j);
      t.m = std::min(t.m, e.n);
    }
  }
  std::sort(t.edges.begin(), t.edges.end());
  if (t.edges.empty()) t.m = 0;
  return t;
}

/// Pooled within-edge variance over edges with n ≥ 2, or nullopt if none.
inline std::optional<double> pooled_within_variance(const ComparisonGraph& g) {
  double ss = 0.0;
  long df = 0;
  for (const auto& e : g.edges()) {
    if (e.n < 2) continue;
    ss += e.within_ss;
    df += e.n - 1;
  }
  if (df == 0) return std::nullopt;
  return ss / static_cast<double>(df);
}

struct FitResult {
  Vector mu_hat;
  PreferenceProfile nu_hat;  // NaN where n_ij = 0
  std::optional<double> sigma2_hat;
  int m_bottleneck = 0;

  /// Edge mean, throwing NoEdge on pairs that were never compared.
  double nu(int i, int j) const {
    const double v = nu_hat(i, j);
    if (std::isnan(v)) throw Error(Errc::NoEdge, "pair was not compared");
    return v;
  }
};

inline FitResult lse_fit(const ComparisonGraph& g) {
  FitResult r;
  r.mu_hat = fit_merits(g);
  r.nu_hat = PreferenceProfile(g.K(), Vector::Constant(static_cast<Index>(n_pairs(g.K())),
                                                       std::numeric_limits<double>::quiet_NaN()));
  for (const auto& e : g.edges()) r.nu_hat.at(e.i, e.j) = e.mean;
  r.sigma2_hat = pooled_within_variance(g);
  r.m_bottleneck = bottleneck_spanning_tree(g).m;
  return r;
}

/// Which items each edge of g touches, as a dense |E| x K incidence block.
inline Matrix edge_incidence(const ComparisonGraph& g, const std::vector<int>& edge_ids) {
  Matrix a = Matrix::Zero(static_cast<Index>(edge_ids.size()), g.K());
  for (std::size_t r = 0; r < edge_ids.size(); ++r) {
    const Edge& e = g.edges()[static_cast<std::size_t>(edge_ids[r])];
    a(static_cast<Index>(r), e.i) = 1.0;
    a(static_cast<Index>(r), e.j) = -1.0;
  }
  return a;
}

}  // namespace lofpc
