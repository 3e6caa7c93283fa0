#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lofpc/graph.hpp"
#include "lofpc/lof_fixed.hpp"
#include "lofpc/numerics.hpp"
#include "lofpc/parallel.hpp"
#include "lofpc/report.hpp"
#include "lofpc/rng.hpp"

namespace lofpc {

inline double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }
inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

// ---------------------------------------------------------------------------
// Complete graphs with a common count m

inline int require_complete_constant(const ComparisonGraph& g) {
  if (!g.is_complete()) throw Error(Errc::NotComplete, "every pair must be compared");
  const auto m = g.constant_count();
  if (!m) throw Error(Errc::UnequalCounts, "every pair must have the same number of comparisons");
  return *m;
}

/// ν̂ for a complete graph.
inline PreferenceProfile edge_means(const ComparisonGraph& g) {
  PreferenceProfile p = PreferenceProfile::zero(g.K());
  for (const auto& e : g.edges()) p.at(e.i, e.j) = e.mean;
  return p;
}

/// binom(K,2)⁻¹ ν̂ᵀ H_K ν̂ with H_K = I - BBᵀ/K, evaluated as ‖ν̂‖² - ‖Bᵀν̂‖²/K.
inline double rmk_quadratic_form(const PreferenceProfile& nu_hat) {
  const double k = nu_hat.K;
  return (nu_hat.values.squaredNorm() - incidence_transpose_apply(nu_hat).squaredNorm() / k) /
         binom2(nu_hat.K);
}

/// Averaged squared residual over all pairs. Also evaluated as the H_K
/// quadratic form; the two must agree.
inline double statistic_rmk(const ComparisonGraph& g) {
  require_complete_constant(g);
  const Vector mu = fit_merits(g);
  double s = 0.0;
  for (const auto& e : g.edges()) {
    const double d = e.mean - (mu(e.i) - mu(e.j));
    s += d * d;
  }
  const double r = s / binom2(g.K());
  const PreferenceProfile nu = edge_means(g);
  const double q = rmk_quadratic_form(nu);
  const double scale = std::max(nu.values.squaredNorm() / binom2(g.K()), 1e-300);
  if (std::abs(r - q) > 1e-8 * scale)
    throw std::logic_error("statistic_rmk: residual and quadratic forms disagree");
  return r;
}

/// Exact null mean of R_{m,K} under normal or any mean-zero errors:
/// (σ²/m)(K-2)/K. Tends to σ²/m.
inline double rmk_null_mean(int K, int m, double sigma2) {
  return sigma2 / m * (K - 2.0) / K;
}

inline double var_rmk_normal(int K, int m, double sigma2, double psi2) {
  const double bk = binom2(K);
  return 2.0 * binom2(K - 1) / (bk * bk) * sigma2 * sigma2 / (double(m) * m) +
         4.0 / bk * psi2 * sigma2 / m;
}

inline double power_rmk(int K, int m, double sigma2, double psi2, double alpha) {
  const double sd0 = std::sqrt(var_rmk_normal(K, m, sigma2, 0.0));
  return 1.0 - normal_cdf(normal_quantile(1.0 - alpha) - psi2 / sd0);
}

/// (m-1)⁻¹ binom(K,2)⁻¹ Σ_ij Σ_k (Y_ijk - ν̂_ij)².
inline double sigma2_pooled_mk(const ComparisonGraph& g) {
  const int m = require_complete_constant(g);
  if (m < 2) throw Error(Errc::MTooSmall, "need at least 2 comparisons per pair");
  double ss = 0.0;
  for (const auto& e : g.edges()) ss += e.within_ss;
  return ss / ((m - 1.0) * binom2(g.K()));
}

/// Normal-approximation test of R_{m,K} with plug-in S²_{m,K}.
inline TestReport rmk_test(const ComparisonGraph& g, double alpha,
                           std::optional<double> sigma2 = std::nullopt) {
  const int m = require_complete_constant(g);
  TestReport rep;
  rep.test = "rmk-normal";
  rep.alpha = alpha;
  rep.regime = "all";
  const double s2 = sigma2 ? *sigma2 : sigma2_pooled_mk(g);
  rep.sigma2 = s2;
  rep.sigma2_source = sigma2 ? "supplied" : "pooled-mk";
  const double r = statistic_rmk(g);
  const double z = (r - rmk_null_mean(g.K(), m, s2)) / std::sqrt(var_rmk_normal(g.K(), m, s2, 0.0));
  rep.statistic = z;
  rep.p_value = 1.0 - normal_cdf(z);
  rep.extra = {{"R_mK", r}, {"m", m}, {"psi2_estimate", r - rmk_null_mean(g.K(), m, s2)}};
  rep.decide();
  return rep;
}

// ---------------------------------------------------------------------------
// Localized tests

struct LocalizedSplit {
  std::vector<int> U;  // 0-based, sorted, unique

  static LocalizedSplit make(std::vector<int> u, int K) {
    std::sort(u.begin(), u.end());
    if (std::adjacent_find(u.begin(), u.end()) != u.end())
      throw Error(Errc::SplitInvalid, "U has duplicate items");
    if (u.empty()) throw Error(Errc::SplitInvalid, "U is empty");
    if (static_cast<int>(u.size()) >= K) throw Error(Errc::SplitInvalid, "U must be a proper subset");
    if (u.front() < 0 || u.back() >= K) throw Error(Errc::SplitInvalid, "U item out of range");
    return {std::move(u)};
  }
  int J() const { return static_cast<int>(U.size()); }
  std::vector<int> complement(int K) const {
    std::vector<int> out;
    std::size_t a = 0;
    for (int i = 0; i < K; ++i) {
      if (a < U.size() && U[a] == i) {
        ++a;
        continue;
      }
      out.push_back(i);
    }
    return out;
  }
  std::vector<bool> membership(int K) const {
    std::vector<bool> in(static_cast<std::size_t>(K), false);
    for (int i : U) in[static_cast<std::size_t>(i)] = true;
    return in;
  }
};

/// Fully present triads inside U.
inline long triad_count(const std::vector<bool>& edge_mask, int K, const LocalizedSplit& split) {
  long c = 0;
  const auto& u = split.U;
  auto has = [&](int a, int b) { return edge_mask[pair_index(a, b, K)]; };
  for (std::size_t a = 0; a < u.size(); ++a)
    for (std::size_t b = a + 1; b < u.size(); ++b) {
      if (!has(u[a], u[b])) continue;
      for (std::size_t c3 = b + 1; c3 < u.size(); ++c3)
        c += has(u[b], u[c3]) && has(u[a], u[c3]);
    }
  return c;
}

/// Mean over edges of (ȳ_e - fitted)² for a count-weighted merit fit.
inline double mean_squared_residual(const ComparisonGraph& g, const Vector& mu) {
  double s = 0.0;
  for (const auto& e : g.edges()) {
    const double d = e.mean - (mu(e.i) - mu(e.j));
    s += d * d;
  }
  return s / static_cast<double>(g.edge_count());
}

inline ComparisonGraph connected_block(const ComparisonGraph& g, const std::vector<int>& items,
                                       const char* name) {
  ComparisonGraph b = induced_subgraph(g, items);
  if (b.edge_count() == 0) throw Error(Errc::EmptyBlock, std::string(name) + " block has no comparisons");
  if (!b.connected())
    throw Error(Errc::DisconnectedSubgraph, std::string(name) + " block: " + describe_components(b));
  return b;
}

/// Where bootstrap and observed statistics take their fitted values from.
enum class BootstrapCenter {
  RefitU,     // merits refit on the U block (R_J as defined for the localized statistic)
  FullGraph,  // full-graph merits in both T_obs and T_b
};

inline const char* center_name(BootstrapCenter c) {
  return c == BootstrapCenter::RefitU ? "refit-u" : "full-graph";
}

struct BootstrapOptions {
  double alpha = 0.05;
  std::size_t B = 499;
  BootstrapCenter center = BootstrapCenter::RefitU;
  int threads = 0;
};

struct LocalizedBlocks {
  ComparisonGraph u, v;
  Vector mu_full, mu_u, mu_v;
  std::vector<int> u_items, v_items;
  double r_j = 0.0, r_k = 0.0;
};

inline LocalizedBlocks localized_blocks(const ComparisonGraph& g, const LocalizedSplit& split) {
  if (split.U.empty() || split.J() >= g.K()) throw Error(Errc::SplitInvalid, "U must be a proper subset");
  LocalizedBlocks b;
  b.u_items = split.U;
  b.v_items = split.complement(g.K());
  b.u = connected_block(g, b.u_items, "U");
  b.v = connected_block(g, b.v_items, "V\\U");
  require_connected(g);
  b.mu_full = fit_merits(g);
  b.mu_u = fit_merits(b.u);
  b.mu_v = fit_merits(b.v);
  b.r_j = mean_squared_residual(b.u, b.mu_u);
  b.r_k = mean_squared_residual(b.v, b.mu_v);
  return b;
}

namespace detail {

inline constexpr std::size_t kBootChunk = 64;

/// Model-based bootstrap of the U-block statistic. Returns T_obs and the
/// replicate statistics.
inline std::pair<double, std::vector<double>> bootstrap_u(const LocalizedBlocks& blk,
                                                          const BootstrapOptions& opt,
                                                          const RngStream& rng) {
  const ComparisonGraph& gu = blk.u;
  const auto ne = static_cast<Index>(gu.edge_count());
  // Centered observation-level residuals from the V\U fit.
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(blk.v.total_n()));
  for (const auto& e : blk.v.edges()) {
    const double f = blk.mu_v(e.i) - blk.mu_v(e.j);
    for (double y : blk.v.samples(e)) pool.push_back(y - f);
  }
  double mean = 0.0;
  for (double x : pool) mean += x;
  mean /= static_cast<double>(pool.size());
  for (double& x : pool) x -= mean;

  // Full-graph fitted differences on U edges, and the U-block residual map.
  Vector d(ne), w(ne);
  std::vector<int> counts(static_cast<std::size_t>(ne));
  for (Index a = 0; a < ne; ++a) {
    const Edge& e = gu.edges()[static_cast<std::size_t>(a)];
    const int gi = blk.u_items[static_cast<std::size_t>(e.i)], gj = blk.u_items[static_cast<std::size_t>(e.j)];
    d(a) = blk.mu_full(gi) - blk.mu_full(gj);
    w(a) = e.n;
    counts[static_cast<std::size_t>(a)] = e.n;
  }
  Matrix resid_map;
  double t_obs;
  if (opt.center == BootstrapCenter::RefitU) {
    std::vector<int> all(gu.edge_count());
    std::iota(all.begin(), all.end(), 0);
    const Matrix a = edge_incidence(gu, all);
    const int J = gu.K();
    Matrix l = a.transpose() * w.asDiagonal() * a;
    l.array() += 1.0 / J;
    resid_map = Matrix::Identity(ne, ne) - a * l.llt().solve(Matrix(a.transpose() * w.asDiagonal()));
    t_obs = blk.r_j;
  } else {
    double s = 0.0;
    for (Index a = 0; a < ne; ++a) {
      const double r = gu.edges()[static_cast<std::size_t>(a)].mean - d(a);
      s += r * r;
    }
    t_obs = s / static_cast<double>(ne);
  }

  std::vector<double> tb(opt.B);
  const std::size_t chunks = (opt.B + kBootChunk - 1) / kBootChunk;
  parallel_for(chunks, [&](std::size_t c) {
    Engine eng = rng.child(c).engine();
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    Vector ybar(ne);
    const std::size_t lo = c * kBootChunk, hi = std::min(opt.B, lo + kBootChunk);
    for (std::size_t b = lo; b < hi; ++b) {
      for (Index a = 0; a < ne; ++a) {
        double s = 0.0;
        const int n = counts[static_cast<std::size_t>(a)];
        for (int k = 0; k < n; ++k) s += pool[pick(eng)];
        ybar(a) = d(a) + s / n;
      }
      if (opt.center == BootstrapCenter::RefitU) {
        tb[b] = (resid_map * ybar).squaredNorm() / static_cast<double>(ne);
      } else {
        tb[b] = (ybar - d).squaredNorm() / static_cast<double>(ne);
      }
    }
  }, opt.threads);
  return {t_obs, std::move(tb)};
}

/// #{T_b ≥ T_obs} / (B + 1).
inline double bootstrap_p_value(double t_obs, const std::vector<double>& tb) {
  std::size_t ge = 0;
  for (double x : tb) ge += x >= t_obs;
  return static_cast<double>(ge) / (static_cast<double>(tb.size()) + 1.0);
}

}  // namespace detail

enum class LocalizedMode { ClosedForm, Bootstrap };

struct LocalizedOptions {
  LocalizedMode mode = LocalizedMode::Bootstrap;
  BootstrapOptions boot;
};

inline TestReport localized_test(const ComparisonGraph& g, const LocalizedSplit& split,
                                 const LocalizedOptions& opt, const RngStream& rng) {
  const LocalizedBlocks blk = localized_blocks(g, split);
  TestReport rep;
  rep.alpha = opt.boot.alpha;
  rep.seed = rng.seed;
  rep.stream = rng.index;
  rep.regime = "localized";
  rep.extra = {{"J", split.J()}, {"R_J", blk.r_j}, {"R_K", blk.r_k}};
  if (opt.mode == LocalizedMode::ClosedForm) {
    const int m = require_complete_constant(g);
    const int J = split.J();
    const int kv = g.K() - J;
    if (J < 3 || kv < 3) throw Error(Errc::EmptyBlock, "closed form needs at least 3 items per block");
    rep.test = "localized-closed-form";
    const double s2 = m * blk.r_k * kv / (kv - 2.0);
    rep.sigma2 = s2;
    rep.sigma2_source = "complement-block";
    const double z = (blk.r_j - rmk_null_mean(J, m, s2)) / std::sqrt(var_rmk_normal(J, m, s2, 0.0));
    rep.statistic = z;
    rep.p_value = 1.0 - normal_cdf(z);
    rep.extra.emplace_back("psi2_estimate", blk.r_j - blk.r_k);
  } else {
    rep.test = "localized-bootstrap";
    rep.draws = static_cast<long>(opt.boot.B);
    rep.regime = std::string("localized:") + center_name(opt.boot.center);
    auto [t, tb] = detail::bootstrap_u(blk, opt.boot, rng);
    rep.statistic = t;
    rep.p_value = detail::bootstrap_p_value(t, tb);
    rep.extra.emplace_back("psi2_estimate", blk.r_j - blk.r_k);
  }
  rep.decide();
  return rep;
}

// ---------------------------------------------------------------------------
// Sparse graphs

struct SparseStatistics {
  double r_j = 0.0;          // U block, refit on U
  double r_k = 0.0;          // all pairs, full-graph merits
  double psi2_estimate = 0.0;
  long triads = 0;
  long u_edges = 0, v_edges = 0;
  std::vector<std::string> diagnostics;
};

inline void require_single_samples(const ComparisonGraph& g) {
  for (const auto& e : g.edges())
    if (e.n != 1) throw Error(Errc::InvalidArgument, "sparse statistics need exactly one comparison per edge");
}

/// Ratio-of-sums statistics on an indicator pattern. The indicators are the
/// edges present in g.
inline SparseStatistics sparse_statistics(const ComparisonGraph& g, const LocalizedSplit& split) {
  require_single_samples(g);
  SparseStatistics s;
  s.triads = triad_count(g.edge_mask(), g.K(), split);
  if (s.triads == 0) s.diagnostics.emplace_back("EmptyTriad: no fully present triad inside U");
  const ComparisonGraph gu = connected_block(g, split.U, "U");
  require_connected(g);
  s.r_j = mean_squared_residual(gu, fit_merits(gu));
  s.r_k = mean_squared_residual(g, fit_merits(g));
  s.psi2_estimate = s.r_j - s.r_k;
  s.u_edges = static_cast<long>(gu.edge_count());
  s.v_edges = static_cast<long>(g.edge_count());
  return s;
}

/// Restrict g to the pairs flagged in `indicators` (by pair_index).
inline ComparisonGraph apply_indicators(const ComparisonGraph& g, const std::vector<bool>& indicators) {
  if (indicators.size() != n_pairs(g.K())) throw Error(Errc::InvalidArgument, "indicator length mismatch");
  GraphBuilder b(g.K());
  for (const auto& e : g.edges())
    if (indicators[pair_index(e.i, e.j, g.K())])
      for (double y : g.samples(e)) b.add(e.i, e.j, y);
  return b.build();
}

inline SparseStatistics sparse_statistics(const ComparisonGraph& g, const LocalizedSplit& split,
                                          const std::vector<bool>& indicators) {
  return sparse_statistics(apply_indicators(g, indicators), split);
}

/// Σ_U b ν_cyc² / Σ_U b, where ν_cyc is the cyclic part of the U-block
/// profile (J items) and b its indicator mask.
inline double sparse_psi2(const PreferenceProfile& nu_u, const std::vector<bool>& mask_u) {
  const PreferenceProfile cyc = decompose(nu_u).cyclic;
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < mask_u.size(); ++p)
    if (mask_u[p]) {
      num += cyc.values(static_cast<Index>(p)) * cyc.values(static_cast<Index>(p));
      den += 1.0;
    }
  return den > 0 ? num / den : 0.0;
}

/// Guide value c(log J)^{1+ε}/J with c = 1, ε = 0.1.
inline double connectivity_guide(int J) { return std::pow(std::log(static_cast<double>(J)), 1.1) / J; }

inline TestReport random_graph_test(const ComparisonGraph& g, const LocalizedSplit& split,
                                    std::optional<double> p_k, const BootstrapOptions& opt,
                                    const RngStream& rng) {
  const SparseStatistics st = sparse_statistics(g, split);
  const LocalizedBlocks blk = localized_blocks(g, split);
  TestReport rep;
  rep.test = "random-graph-bootstrap";
  rep.alpha = opt.alpha;
  rep.seed = rng.seed;
  rep.stream = rng.index;
  rep.draws = static_cast<long>(opt.B);
  rep.regime = std::string("localized:") + center_name(opt.center);
  const double p = p_k ? *p_k : static_cast<double>(g.edge_count()) / static_cast<double>(n_pairs(g.K()));
  if (p < connectivity_guide(split.J()))
    rep.warnings.push_back("edge probability below the (log J)^1.1/J connectivity guide");
  for (const auto& d : st.diagnostics) rep.warnings.push_back(d);
  auto [t, tb] = detail::bootstrap_u(blk, opt, rng);
  rep.statistic = t;
  rep.p_value = detail::bootstrap_p_value(t, tb);
  rep.extra = {{"J", split.J()},          {"p_K", p},
               {"R_J", st.r_j},           {"R_K", st.r_k},
               {"psi2_estimate", st.psi2_estimate}, {"triads", static_cast<double>(st.triads)}};
  rep.decide();
  return rep;
}

// ---------------------------------------------------------------------------
// Detectability as K grows

struct LargeDetectability {
  double ratio = 0.0;       // s/K or s/J
  double norm_bound = 0.0;  // ‖ν_cyc‖² ≤ 3 s γ*²
  double scaled_psi2_bound = 0.0;  // Kψ² ≤ 6 s γ*² / (K-1)
  bool detectable = false;
};

inline LargeDetectability detectability_large(int K, long s, double gamma_max,
                                              std::optional<int> J = std::nullopt,
                                              double floor = 0.01) {
  const int n = J ? *J : K;
  if (n < 2) throw Error(Errc::InvalidArgument, "need at least 2 items");
  LargeDetectability d;
  d.ratio = static_cast<double>(s) / n;
  d.norm_bound = 3.0 * static_cast<double>(s) * gamma_max * gamma_max;
  d.scaled_psi2_bound = 6.0 * static_cast<double>(s) * gamma_max * gamma_max / (n - 1.0);
  d.detectable = d.ratio >= floor;
  return d;
}

/// Least-squares slope of log s against log K. Below 1 means s/K → 0.
inline double support_growth_exponent(const std::vector<int>& Ks, const std::vector<long>& ss) {
  if (Ks.size() != ss.size() || Ks.size() < 2) throw Error(Errc::InvalidArgument, "need two or more points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(Ks.size());
  for (std::size_t a = 0; a < Ks.size(); ++a) {
    if (Ks[a] <= 0 || ss[a] <= 0) throw Error(Errc::InvalidArgument, "K and s must be positive");
    mx += std::log(Ks[a]);
    my += std::log(static_cast<double>(ss[a]));
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t a = 0; a < Ks.size(); ++a) {
    const double dx = std::log(Ks[a]) - mx;
    sxy += dx * (std::log(static_cast<double>(ss[a])) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw Error(Errc::InvalidArgument, "K values must differ");
  return sxy / sxx;
}

}  // namespace lofpc
