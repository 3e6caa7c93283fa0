#pragma once

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lofpc/graph.hpp"
#include "lofpc/lof_fixed.hpp"
#include "lofpc/parallel.hpp"
#include "lofpc/report.hpp"
#include "lofpc/rng.hpp"

namespace lofpc {

namespace detail {
/// Calls f(e_ij, e_jk, e_ik) for every triad with all three pairs present.
template <class F>
void for_each_present_triad(const ComparisonGraph& g, F&& f) {
  const int K = g.K();
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) {
      const int pij = g.edge_pos(i, j);
      if (pij < 0) continue;
      for (int k = j + 1; k < K; ++k) {
        const int pjk = g.edge_pos(j, k), pik = g.edge_pos(i, k);
        if (pjk < 0 || pik < 0) continue;
        f(g.edges()[static_cast<std::size_t>(pij)], g.edges()[static_cast<std::size_t>(pjk)],
          g.edges()[static_cast<std::size_t>(pik)]);
      }
    }
}

/// Z_ij = 1 when i wins at least half of its comparisons with j. Exact ties
/// count as i beating j.
inline int sign_indicator(const ComparisonGraph& g, const Edge& e) {
  int w = 0;
  for (double y : g.samples(e)) w += y > 0;
  return 2 * w >= e.n ? 1 : 0;
}
}  // namespace detail

/// Number of cyclic triads in the sign pattern.
inline long kendall_smith(const ComparisonGraph& g) {
  std::vector<int> z(g.edge_count());
  for (std::size_t p = 0; p < g.edge_count(); ++p) z[p] = detail::sign_indicator(g, g.edges()[p]);
  const Edge* base = g.edges().data();
  long t = 0;
  detail::for_each_present_triad(g, [&](const Edge& ij, const Edge& jk, const Edge& ik) {
    const int zij = z[static_cast<std::size_t>(&ij - base)];
    const int zjk = z[static_cast<std::size_t>(&jk - base)];
    const int zik = z[static_cast<std::size_t>(&ik - base)];
    // i>j>k>i or i>k>j>i
    t += zij * zjk * (1 - zik) + zik * (1 - zjk) * (1 - zij);
  });
  return t;
}

/// Number of triads whose cycle sum fails a two-sided z-test at 1.96.
inline long kendall_smith_cardinal(const ComparisonGraph& g, double sigma2_hat) {
  const auto m = g.constant_count();
  if (!m) throw Error(Errc::UnequalCounts, "cardinal count needs equal comparison counts");
  if (!(sigma2_hat > 0)) throw Error(Errc::InvalidArgument, "sigma2_hat must be positive");
  const double scale = std::sqrt(static_cast<double>(*m)) / std::sqrt(3.0 * sigma2_hat);
  long t = 0;
  detail::for_each_present_triad(g, [&](const Edge& ij, const Edge& jk, const Edge& ik) {
    const double s = ij.mean + jk.mean - ik.mean;
    t += scale * std::abs(s) > 1.96;
  });
  return t;
}

enum class CountStatistic { KendallSmith, Cardinal };

inline const char* count_statistic_name(CountStatistic s) {
  return s == CountStatistic::KendallSmith ? "kendall-smith" : "kendall-smith-cardinal";
}

/// σ̂² for the cardinal count: pooled within-pair variance when available,
/// else the supplied value.
inline double cardinal_sigma2(const ComparisonGraph& g, std::optional<double> fallback) {
  if (auto s = pooled_within_variance(g); s && *s > 0) return *s;
  if (fallback && *fallback > 0) return *fallback;
  throw Error(Errc::SigmaUnidentifiable, "cardinal count needs replicated pairs or a supplied sigma2");
}

inline long count_statistic(const ComparisonGraph& g, CountStatistic which,
                            std::optional<double> sigma2 = std::nullopt) {
  if (which == CountStatistic::KendallSmith) return kendall_smith(g);
  return kendall_smith_cardinal(g, cardinal_sigma2(g, sigma2));
}

/// Fills the template's pattern of pair counts with Y = μ_i - μ_j + σZ.
inline ComparisonGraph regenerate(const ComparisonGraph& tmpl, const Vector& mu, double sigma,
                                  Engine& eng) {
  std::normal_distribution<double> z(0.0, 1.0);
  GraphBuilder b(tmpl.K());
  for (const auto& e : tmpl.edges()) {
    b.reserve(e.i, e.j, static_cast<std::size_t>(e.n));
    const double nu = mu(e.i) - mu(e.j);
    for (int k = 0; k < e.n; ++k) b.add(e.i, e.j, nu + sigma * z(eng));
  }
  return b.build();
}

/// Monte Carlo null distribution of a count statistic on a fixed pattern.
struct CountCalibration {
  CountStatistic which = CountStatistic::KendallSmith;
  double alpha = 0.05;
  long critical_value = 1;
  std::vector<long> draws;  // sorted

  /// (1 + #{T_null ≥ t}) / (D + 1).
  double p_value(long t) const {
    const auto it = std::lower_bound(draws.begin(), draws.end(), t);
    return (1.0 + static_cast<double>(draws.end() - it)) / (static_cast<double>(draws.size()) + 1.0);
  }
  bool reject(long t) const { return t >= critical_value; }
};

/// Smallest c with P_null(T ≥ c) ≤ α.
inline CountCalibration calibrate_count_test(const ComparisonGraph& tmpl, const Vector& mu_null,
                                             double sigma, CountStatistic which, std::size_t draws,
                                             double alpha, const RngStream& rng, int threads = 0) {
  if (mu_null.size() != tmpl.K()) throw Error(Errc::InvalidArgument, "mu_null has the wrong length");
  CountCalibration cal;
  cal.which = which;
  cal.alpha = alpha;
  cal.draws.resize(draws);
  const double s2 = sigma * sigma;
  parallel_for(draws, [&](std::size_t d) {
    Engine eng = rng.child(d).engine();
    const ComparisonGraph g = regenerate(tmpl, mu_null, sigma, eng);
    cal.draws[d] = count_statistic(g, which, s2);
  }, threads);
  std::sort(cal.draws.begin(), cal.draws.end());
  const double n = static_cast<double>(draws);
  long c = 1;
  for (;;) {
    const auto it = std::lower_bound(cal.draws.begin(), cal.draws.end(), c);
    if (static_cast<double>(cal.draws.end() - it) <= alpha * n) break;
    ++c;
  }
  cal.critical_value = c;
  return cal;
}

inline TestReport count_test(const ComparisonGraph& g, CountStatistic which, const CountCalibration& cal,
                             std::optional<double> sigma2 = std::nullopt) {
  TestReport rep;
  rep.test = count_statistic_name(which);
  rep.alpha = cal.alpha;
  rep.draws = static_cast<long>(cal.draws.size());
  const long t = count_statistic(g, which, sigma2);
  rep.statistic = static_cast<double>(t);
  rep.p_value = cal.p_value(t);
  rep.critical_value = static_cast<double>(cal.critical_value);
  rep.reject = cal.reject(t);
  return rep;
}

// ---------------------------------------------------------------------------
// Regression F-test

/// Nested F-test of γ = 0 in ν = Bμ + Σ γ_t c_t, using observation-level
/// residual sums computed from edge sufficient statistics.
inline TestReport f_test(const ComparisonGraph& g, const std::vector<Triad>& candidates, double alpha = 0.05) {
  if (candidates.empty()) throw Error(Errc::EmptyCandidateSet, "f_test needs at least one candidate triad");
  require_connected(g);
  const int K = g.K();
  const auto ne = static_cast<Index>(g.edge_count());
  const auto q = static_cast<Index>(candidates.size());
  std::vector<PreferenceProfile> cols;
  for (const auto& t : candidates) cols.push_back(triad_vector(t, K));

  Matrix x(ne, (K - 1) + q);
  x.setZero();
  Vector y(ne);
  double within = 0.0;
  for (Index r = 0; r < ne; ++r) {
    const Edge& e = g.edges()[static_cast<std::size_t>(r)];
    const double sw = std::sqrt(static_cast<double>(e.n));
    // Item K-1 is the reference level.
    if (e.i < K - 1) x(r, e.i) = sw;
    if (e.j < K - 1) x(r, e.j) = -sw;
    for (Index c = 0; c < q; ++c) x(r, (K - 1) + c) = sw * cols[static_cast<std::size_t>(c)](e.i, e.j);
    y(r) = sw * e.mean;
    within += e.within_ss;
  }
  const long n = g.total_n();
  const long df1 = n - (K - 1) - static_cast<long>(q);
  if (df1 < 1) throw Error(Errc::NoResidualDf, "no residual degrees of freedom");

  Eigen::ColPivHouseholderQR<Matrix> qr1(x);
  if (qr1.rank() != x.cols())
    throw Error(Errc::RankDeficientDesign, "candidate triads are not identifiable on this graph");
  const Matrix x0 = x.leftCols(K - 1);
  Eigen::ColPivHouseholderQR<Matrix> qr0(x0);
  const Vector b1 = qr1.solve(y), b0 = qr0.solve(y);
  const double rss1 = within + (y - x * b1).squaredNorm();
  const double rss0 = within + (y - x0 * b0).squaredNorm();

  TestReport rep;
  rep.test = "f-test";
  rep.alpha = alpha;
  rep.regime = "all";
  const double num = std::max(rss0 - rss1, 0.0) / static_cast<double>(q);
  const double den = rss1 / static_cast<double>(df1);
  if (den <= 0) {
    rep.statistic = std::numeric_limits<double>::infinity();
    rep.p_value = num > 0 ? 0.0 : 1.0;
  } else {
    rep.statistic = num / den;
    boost::math::fisher_f dist(static_cast<double>(q), static_cast<double>(df1));
    rep.p_value = boost::math::cdf(boost::math::complement(dist, rep.statistic));
  }
  rep.extra = {{"q", static_cast<double>(q)}, {"df_residual", static_cast<double>(df1)},
               {"rss_null", rss0}, {"rss_full", rss1}};
  if (q == 1 && den > 0) {
    const Matrix xtx_inv = (x.transpose() * x).inverse();
    const Index c = x.cols() - 1;
    rep.extra.emplace_back("t", b1(c) / std::sqrt(den * xtx_inv(c, c)));
  }
  rep.decide();
  return rep;
}

}  // namespace lofpc
