#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lofpc/baselines.hpp"
#include "lofpc/graph.hpp"
#include "lofpc/lof_fixed.hpp"
#include "lofpc/lof_large.hpp"
#include "lofpc/parallel.hpp"
#include "lofpc/rng.hpp"

namespace lofpc {

struct CyclicTerm {
  Triad triad;
  double gamma = 1.0;
};

struct CountScheme {
  enum class Kind { FixedM, Binomial, Path, ErdosRenyi };
  Kind kind = Kind::FixedM;
  int m = 1;       // FixedM count, Binomial trials, ErdosRenyi count per present pair
  double p = 1.0;  // Binomial success or ErdosRenyi edge probability

  bool random() const { return kind != Kind::FixedM; }
};

/// One test evaluated in every replication.
struct TestSpec {
  enum class Kind { Lof, KendallSmith, Cardinal, F, Localized, RandomGraph, Rmk };
  std::string name;
  Kind kind = Kind::Lof;
  Regime regime;
  std::vector<Triad> candidates;  // F
  std::vector<int> U;             // Localized, RandomGraph (0-based)
  LocalizedMode mode = LocalizedMode::Bootstrap;
  std::size_t B = 499;
  BootstrapCenter center = BootstrapCenter::RefitU;
};

struct Scenario {
  std::string name = "scenario";
  int K = 3;
  CountScheme counts;
  Vector mu;  // empty means zero
  std::vector<CyclicTerm> cyclic;
  double sigma = 1.0;
  bool sigma2_known = true;
  long replications = 10000;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::size_t null_draws = 100000;
  std::size_t per_rep_draws = 999;
  Vector null_mu;  // count-test calibration merits; empty means zero
  std::vector<TestSpec> tests;

  Vector merits() const { return mu.size() ? mu : Vector::Zero(K); }

  /// ν = Bμ + Σ γ c.
  PreferenceProfile profile() const {
    PreferenceProfile nu = linear_profile(merits());
    for (const auto& c : cyclic) nu.values += c.gamma * triad_vector(c.triad, K).values;
    return nu;
  }

  /// Item blocks that must be connected in every generated graph.
  std::vector<std::vector<int>> required_blocks() const {
    std::vector<std::vector<int>> out;
    for (const auto& t : tests)
      if (t.kind == TestSpec::Kind::Localized || t.kind == TestSpec::Kind::RandomGraph) {
        const auto split = LocalizedSplit::make(t.U, K);
        out.push_back(split.U);
        out.push_back(split.complement(K));
      }
    return out;
  }

  void validate() const {
    if (K < 3) throw Error(Errc::ConfigError, "K: must be at least 3");
    if (mu.size() && mu.size() != K) throw Error(Errc::ConfigError, "merits: length must equal K");
    if (null_mu.size() && null_mu.size() != K) throw Error(Errc::ConfigError, "null_merits: length must equal K");
    if (!(sigma >= 0)) throw Error(Errc::ConfigError, "sigma: must be nonnegative");
    if (replications < 1) throw Error(Errc::ConfigError, "replications: must be positive");
    if (!(alpha > 0 && alpha < 1)) throw Error(Errc::ConfigError, "alpha: must be in (0,1)");
    if (counts.m < 1) throw Error(Errc::ConfigError, "counts.m: must be positive");
    if (!(counts.p > 0 && counts.p <= 1)) throw Error(Errc::ConfigError, "counts.p: must be in (0,1]");
    if (counts.kind == CountScheme::Kind::Path && K < 4)
      throw Error(Errc::ConfigError, "counts: path scheme needs K >= 4");
    for (const auto& c : cyclic)
      if (!(0 <= c.triad.i && c.triad.i < c.triad.j && c.triad.j < c.triad.k && c.triad.k < K))
        throw Error(Errc::ConfigError, "cyclic: triad out of range");
    if (tests.empty()) throw Error(Errc::ConfigError, "tests: at least one test required");
    for (std::size_t t = 0; t < tests.size(); ++t) {
      const auto& ts = tests[t];
      const std::string at = "tests[" + std::to_string(t) + "]";
      const bool count_test = ts.kind == TestSpec::Kind::KendallSmith || ts.kind == TestSpec::Kind::Cardinal;
      if (count_test && counts.random())
        throw Error(Errc::ConfigError, at + ".kind: count tests need a fixed count scheme");
      if (ts.kind == TestSpec::Kind::F && ts.candidates.empty())
        throw Error(Errc::ConfigError, at + ".candidates: required for the F-test");
      if (ts.kind == TestSpec::Kind::Localized || ts.kind == TestSpec::Kind::RandomGraph) {
        try {
          LocalizedSplit::make(ts.U, K);
        } catch (const Error& e) {
          throw Error(Errc::ConfigError, at + ".U: " + e.what());
        }
      }
    }
  }
};

namespace detail {

inline std::vector<int> draw_counts(const Scenario& sc, Engine& eng) {
  const int K = sc.K;
  std::vector<int> n(n_pairs(K), 0);
  switch (sc.counts.kind) {
    case CountScheme::Kind::FixedM:
      std::fill(n.begin(), n.end(), sc.counts.m);
      break;
    case CountScheme::Kind::Binomial: {
      std::binomial_distribution<int> bin(sc.counts.m, sc.counts.p);
      for (auto& x : n) x = bin(eng);
      break;
    }
    case CountScheme::Kind::Path: {
      std::binomial_distribution<int> bin(5, 0.5);
      for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
          int v;
          if (j == i + 1 || (i == 0 && j == 2))
            v = 20;
          else if (i == 1 && j == 3)
            v = 10;
          else
            v = bin(eng);
          n[pair_index(i, j, K)] = v;
        }
      break;
    }
    case CountScheme::Kind::ErdosRenyi: {
      std::bernoulli_distribution b(sc.counts.p);
      for (auto& x : n) x = b(eng) ? sc.counts.m : 0;
      break;
    }
  }
  return n;
}

inline bool block_connected(const std::vector<int>& n, int K, const std::vector<int>& items) {
  std::vector<int> local(static_cast<std::size_t>(K), -1);
  for (std::size_t a = 0; a < items.size(); ++a) local[static_cast<std::size_t>(items[a])] = static_cast<int>(a);
  UnionFind uf(static_cast<int>(items.size()));
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j)
      if (n[pair_index(i, j, K)] > 0 && local[static_cast<std::size_t>(i)] >= 0 && local[static_cast<std::size_t>(j)] >= 0)
        uf.unite(local[static_cast<std::size_t>(i)], local[static_cast<std::size_t>(j)]);
  return uf.sets() == 1;
}

}  // namespace detail

inline constexpr int kMaxGenerateRetries = 100;

/// One synthetic graph. Random count patterns are redrawn until the graph
/// and every block in `blocks` are connected.
inline ComparisonGraph generate(const Scenario& sc, const RngStream& rng,
                                const std::vector<std::vector<int>>& blocks = {}) {
  Engine eng = rng.engine();
  std::vector<int> n;
  std::vector<int> all(static_cast<std::size_t>(sc.K));
  std::iota(all.begin(), all.end(), 0);
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxGenerateRetries)
      throw Error(Errc::RetriesExhausted, "no connected count pattern after 100 draws");
    n = detail::draw_counts(sc, eng);
    if (!sc.counts.random()) break;
    bool ok = detail::block_connected(n, sc.K, all);
    for (std::size_t b = 0; ok && b < blocks.size(); ++b) ok = detail::block_connected(n, sc.K, blocks[b]);
    if (ok) break;
  }
  const PreferenceProfile nu = sc.profile();
  std::normal_distribution<double> z(0.0, 1.0);
  GraphBuilder gb(sc.K);
  std::size_t p = 0;
  for (int i = 0; i < sc.K; ++i)
    for (int j = i + 1; j < sc.K; ++j, ++p) {
      const int c = n[p];
      if (c == 0) continue;
      gb.reserve(i, j, static_cast<std::size_t>(c));
      const double mean = nu.values(static_cast<Index>(p));
      for (int k = 0; k < c; ++k) gb.add(i, j, mean + sc.sigma * z(eng));
    }
  return gb.build();
}

struct PowerRow {
  std::string test;
  long rejections = 0;
  long reps = 0;
  double estimate = 0.0;
  double se = 0.0;
};

struct PowerTable {
  std::string scenario;
  std::uint64_t seed = 0;
  long reps = 0;
  std::vector<PowerRow> rows;
};

namespace detail {

/// Null samples shared across replications, keyed by spectrum. Each entry is
/// drawn from a stream derived from its key, so which replication happens to
/// create it does not matter.
class NullCache {
 public:
  NullCache(std::uint64_t seed, std::size_t draws) : root_(seed, 0xC0FFEE), draws_(draws) {}

  const NullCalibration& get(const Vector& unit_spectrum) {
    std::vector<double> key(unit_spectrum.data(), unit_spectrum.data() + unit_spectrum.size());
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    std::uint64_t h = key.size();
    for (double x : key) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      h = splitmix64(h ^ bits);
    }
    auto cal = std::make_unique<NullCalibration>(null_sample(unit_spectrum, draws_, root_.child(h), 1));
    return *cache_.emplace(std::move(key), std::move(cal)).first->second;
  }

 private:
  RngStream root_;
  std::size_t draws_;
  std::mutex mu_;
  std::map<std::vector<double>, std::unique_ptr<NullCalibration>> cache_;
};

}  // namespace detail

/// Rejection frequency of every test over the scenario's replications.
inline PowerTable power_study(const Scenario& sc, int threads = 0) {
  sc.validate();
  const RngStream root(sc.seed);
  const auto blocks = sc.required_blocks();
  const std::size_t nt = sc.tests.size();
  const double s2_true = sc.sigma * sc.sigma;

  // Count-test calibrations are fixed for the scenario.
  std::vector<std::optional<CountCalibration>> count_cal(nt);
  GraphBuilder tb(sc.K);
  for (int i = 0; i < sc.K; ++i)
    for (int j = i + 1; j < sc.K; ++j)
      for (int k = 0; k < sc.counts.m; ++k) tb.add(i, j, 0.0);
  const ComparisonGraph tmpl = tb.build();
  const Vector null_mu = sc.null_mu.size() ? sc.null_mu : Vector::Zero(sc.K);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto k = sc.tests[t].kind;
    if (k == TestSpec::Kind::KendallSmith || k == TestSpec::Kind::Cardinal)
      count_cal[t] = calibrate_count_test(
          tmpl, null_mu, sc.sigma,
          k == TestSpec::Kind::KendallSmith ? CountStatistic::KendallSmith : CountStatistic::Cardinal,
          sc.null_draws, sc.alpha, root.child(0xCA1Bu + t), threads);
  }

  detail::NullCache cache(sc.seed, sc.null_draws);
  std::vector<unsigned char> rej(static_cast<std::size_t>(sc.replications) * nt, 0);

  parallel_for(static_cast<std::size_t>(sc.replications), [&](std::size_t r) {
    const RngStream rs = root.child(r);
    const ComparisonGraph g = generate(sc, rs.child(0), blocks);
    std::optional<Vector> mu;
    for (std::size_t t = 0; t < nt; ++t) {
      const TestSpec& ts = sc.tests[t];
      const RngStream trng = rs.child(1 + t);
      bool reject = false;
      switch (ts.kind) {
        case TestSpec::Kind::Lof: {
          if (!mu) mu = fit_merits(g);
          const double stat = statistic_r(g, ts.regime, *mu);
          double s2 = s2_true;
          if (!sc.sigma2_known) s2 = resolve_sigma2(g, std::nullopt).first;
          const Vector lam = null_spectrum(g, ts.regime, 1.0);
          if (lam.size() == 0) break;
          const bool cacheable = ts.regime.kind == Regime::Kind::All || !sc.counts.random();
          double p;
          if (cacheable) {
            p = cache.get(lam).p_value(stat, s2);
          } else {
            p = NullCalibration(null_sample(lam, sc.per_rep_draws, trng, 1)).p_value(stat, s2);
          }
          reject = p <= sc.alpha;
          break;
        }
        case TestSpec::Kind::KendallSmith:
        case TestSpec::Kind::Cardinal: {
          const auto which =
              ts.kind == TestSpec::Kind::KendallSmith ? CountStatistic::KendallSmith : CountStatistic::Cardinal;
          reject = count_cal[t]->reject(count_statistic(g, which, s2_true));
          break;
        }
        case TestSpec::Kind::F:
          reject = f_test(g, ts.candidates, sc.alpha).reject;
          break;
        case TestSpec::Kind::Localized: {
          LocalizedOptions o;
          o.mode = ts.mode;
          o.boot = {sc.alpha, ts.B, ts.center, 1};
          reject = localized_test(g, LocalizedSplit::make(ts.U, sc.K), o, trng).reject;
          break;
        }
        case TestSpec::Kind::RandomGraph: {
          const BootstrapOptions o{sc.alpha, ts.B, ts.center, 1};
          reject = random_graph_test(g, LocalizedSplit::make(ts.U, sc.K), sc.counts.p, o, trng).reject;
          break;
        }
        case TestSpec::Kind::Rmk: {
          std::optional<double> s2;
          if (sc.sigma2_known) s2 = s2_true;
          reject = rmk_test(g, sc.alpha, s2).reject;
          break;
        }
      }
      rej[r * nt + t] = reject;
    }
  }, threads);

  PowerTable out;
  out.scenario = sc.name;
  out.seed = sc.seed;
  out.reps = sc.replications;
  for (std::size_t t = 0; t < nt; ++t) {
    PowerRow row;
    row.test = sc.tests[t].name;
    row.reps = sc.replications;
    for (long r = 0; r < sc.replications; ++r) row.rejections += rej[static_cast<std::size_t>(r) * nt + t];
    row.estimate = static_cast<double>(row.rejections) / static_cast<double>(row.reps);
    row.se = std::sqrt(row.estimate * (1.0 - row.estimate) / static_cast<double>(row.reps));
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace lofpc
