#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lofpc/graph.hpp"
#include "lofpc/lof_large.hpp"
#include "lofpc/parallel.hpp"
#include "lofpc/rng.hpp"

namespace lofpc {

struct Game {
  std::string season;
  std::string home, away;
  double home_score = 0.0, away_score = 0.0;
};

/// Seasons over a shared, sorted team index.
struct SeasonPanel {
  std::vector<std::string> seasons;
  std::vector<std::string> teams;
  std::vector<ComparisonGraph> graphs;

  int K() const { return static_cast<int>(teams.size()); }
};

/// Y = home_score - away_score on the (home, away) pair. Seasons and teams
/// are ordered lexicographically.
inline SeasonPanel build_panel(const std::vector<Game>& games) {
  if (games.empty()) throw Error(Errc::NoData, "no games");
  std::set<std::string> seasons, teams;
  for (const auto& g : games) {
    if (g.home == g.away) throw Error(Errc::InvalidArgument, "team plays itself: " + g.home);
    seasons.insert(g.season);
    teams.insert(g.home);
    teams.insert(g.away);
  }
  SeasonPanel p;
  p.seasons.assign(seasons.begin(), seasons.end());
  p.teams.assign(teams.begin(), teams.end());
  if (p.teams.size() < 2) throw Error(Errc::NoData, "need at least two teams");
  std::map<std::string, int> tid, sid;
  for (std::size_t a = 0; a < p.teams.size(); ++a) tid[p.teams[a]] = static_cast<int>(a);
  for (std::size_t a = 0; a < p.seasons.size(); ++a) sid[p.seasons[a]] = static_cast<int>(a);
  std::vector<GraphBuilder> b(p.seasons.size(), GraphBuilder(p.K()));
  for (const auto& g : games)
    b[static_cast<std::size_t>(sid[g.season])].add(tid[g.home], tid[g.away], g.home_score - g.away_score);
  for (auto& gb : b) p.graphs.push_back(gb.build());
  return p;
}

/// π̂_ij: share of (i, j) games won by i. Zero differentials count ½ each.
/// NaN for pairs that never met.
inline Matrix win_fractions(const ComparisonGraph& g) {
  Matrix pi = Matrix::Constant(g.K(), g.K(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& e : g.edges()) {
    double w = 0.0;
    for (double y : g.samples(e)) w += y > 0 ? 1.0 : (y == 0 ? 0.5 : 0.0);
    pi(e.i, e.j) = w / e.n;
    pi(e.j, e.i) = 1.0 - pi(e.i, e.j);
  }
  return pi;
}

namespace detail {
inline bool cyclic_by_fraction(const Matrix& pi, int i, int j, int k) {
  const double a = pi(i, j), b = pi(j, k), c = pi(k, i);
  if (std::isnan(a) || std::isnan(b) || std::isnan(c)) return false;
  return (a >= 0.5 && b >= 0.5 && c >= 0.5) || (a <= 0.5 && b <= 0.5 && c <= 0.5);
}
}  // namespace detail

/// Cyclic triads among the active teams.
inline std::vector<Triad> cyclic_triads(const Matrix& pi, const std::vector<bool>& active) {
  const int K = static_cast<int>(pi.rows());
  std::vector<Triad> out;
  for (int i = 0; i < K; ++i) {
    if (!active[static_cast<std::size_t>(i)]) continue;
    for (int j = i + 1; j < K; ++j) {
      if (!active[static_cast<std::size_t>(j)]) continue;
      for (int k = j + 1; k < K; ++k)
        if (active[static_cast<std::size_t>(k)] && detail::cyclic_by_fraction(pi, i, j, k)) out.push_back({i, j, k});
    }
  }
  return out;
}

struct CyclicTeams {
  std::vector<int> removal_order;
  std::vector<int> teams;  // sorted
  long initial_triads = 0;
};

/// Greedy removal: drop the team in the most cyclic triads (lowest index on
/// ties) until none remain. One valid acyclic certificate, not a canonical one.
inline CyclicTeams cyclic_teams(const ComparisonGraph& g) {
  const Matrix pi = win_fractions(g);
  std::vector<bool> active(static_cast<std::size_t>(g.K()), true);
  CyclicTeams out;
  auto triads = cyclic_triads(pi, active);
  out.initial_triads = static_cast<long>(triads.size());
  while (!triads.empty()) {
    std::vector<long> hits(static_cast<std::size_t>(g.K()), 0);
    for (const auto& t : triads) {
      ++hits[static_cast<std::size_t>(t.i)];
      ++hits[static_cast<std::size_t>(t.j)];
      ++hits[static_cast<std::size_t>(t.k)];
    }
    const int drop = static_cast<int>(std::max_element(hits.begin(), hits.end()) - hits.begin());
    active[static_cast<std::size_t>(drop)] = false;
    out.removal_order.push_back(drop);
    triads = cyclic_triads(pi, active);
  }
  out.teams = out.removal_order;
  std::sort(out.teams.begin(), out.teams.end());
  return out;
}

/// |A ∩ B| / |A ∪ B|; two empty sets give 1.
inline double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (int x : sa) inter += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct Transitions {
  std::array<std::array<long, 2>, 2> counts{};
  std::array<std::array<double, 2>, 2> p{};
  std::array<bool, 2> defined{};
  std::vector<std::string> diagnostics;
};

/// Pooled MLE of a two-state chain. states[t][i] is team i's state in season t.
inline Transitions markov_transitions(const std::vector<std::vector<bool>>& states) {
  if (states.size() < 2) throw Error(Errc::InvalidArgument, "need at least two seasons");
  Transitions tr;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    if (states[t].size() != states[t + 1].size())
      throw Error(Errc::InvalidArgument, "team index differs between seasons");
    for (std::size_t i = 0; i < states[t].size(); ++i) ++tr.counts[states[t][i]][states[t + 1][i]];
  }
  for (int k = 0; k < 2; ++k) {
    const long den = tr.counts[k][0] + tr.counts[k][1];
    tr.defined[k] = den > 0;
    if (den == 0) {
      tr.p[k] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
      tr.diagnostics.push_back("NoTransitionsFromState(" + std::to_string(k) + ")");
      continue;
    }
    tr.p[k][0] = static_cast<double>(tr.counts[k][0]) / den;
    tr.p[k][1] = static_cast<double>(tr.counts[k][1]) / den;
  }
  return tr;
}

inline std::vector<std::vector<bool>> membership_states(const std::vector<std::vector<int>>& sets, int K) {
  std::vector<std::vector<bool>> s;
  for (const auto& set : sets) {
    std::vector<bool> row(static_cast<std::size_t>(K), false);
    for (int i : set) row[static_cast<std::size_t>(i)] = true;
    s.push_back(std::move(row));
  }
  return s;
}

struct Prediction {
  std::vector<int> candidates;  // S_t
  std::vector<double> alphas;
  std::vector<double> rejection;  // per alpha
  std::size_t graphs = 0;
  std::size_t inner_B = 0;
};

/// Tests the season-t cyclic set on complete graphs drawn from season t+1:
/// each graph takes one game per pair, uniformly among that pair's games.
inline Prediction predict_next_season(const SeasonPanel& panel, std::size_t t,
                                      const std::vector<double>& alphas, std::size_t graphs,
                                      std::size_t inner_B, const RngStream& rng, int threads = 0) {
  if (t + 1 >= panel.graphs.size()) throw Error(Errc::InvalidArgument, "season t+1 is not in the panel");
  Prediction pr;
  pr.candidates = cyclic_teams(panel.graphs[t]).teams;
  pr.alphas = alphas;
  pr.graphs = graphs;
  pr.inner_B = inner_B;
  if (pr.candidates.empty()) throw Error(Errc::EmptyCandidateSet, "no cyclic teams in season " + panel.seasons[t]);
  const auto split = LocalizedSplit::make(pr.candidates, panel.K());
  const ComparisonGraph& next = panel.graphs[t + 1];
  if (!next.is_complete()) throw Error(Errc::NotComplete, "season " + panel.seasons[t + 1] + " misses some pairs");

  std::vector<double> pvals(graphs);
  parallel_for(graphs, [&](std::size_t b) {
    const RngStream rs = rng.child(b);
    Engine eng = rs.child(0).engine();
    GraphBuilder gb(panel.K());
    for (const auto& e : next.edges()) {
      std::uniform_int_distribution<int> pick(0, e.n - 1);
      gb.add(e.i, e.j, next.samples(e)[static_cast<std::size_t>(pick(eng))]);
    }
    LocalizedOptions o;
    o.boot.B = inner_B;
    o.boot.threads = 1;
    pvals[b] = localized_test(gb.build(), split, o, rs.child(1)).p_value;
  }, threads);
  for (double a : alphas) {
    std::size_t k = 0;
    for (double p : pvals) k += p <= a;
    pr.rejection.push_back(static_cast<double>(k) / static_cast<double>(graphs));
  }
  return pr;
}

}  // namespace lofpc
