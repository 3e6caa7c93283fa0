#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lofpc/graph.hpp"
#include "lofpc/numerics.hpp"
#include "lofpc/parallel.hpp"
#include "lofpc/report.hpp"
#include "lofpc/rng.hpp"

namespace lofpc {

/// Which edges enter the residual sum.
struct Regime {
  enum class Kind { All, Threshold, Explicit };
  Kind kind = Kind::All;
  int threshold = 0;
  std::vector<std::pair<int, int>> edges;  // Explicit only

  static Regime all() { return {}; }
  static Regime at_least(int t) {
    Regime r;
    r.kind = Kind::Threshold;
    r.threshold = t;
    return r;
  }
  static Regime explicit_edges(std::vector<std::pair<int, int>> e) {
    Regime r;
    r.kind = Kind::Explicit;
    r.edges = std::move(e);
    return r;
  }

  std::string label() const {
    switch (kind) {
      case Kind::All: return "all";
      case Kind::Threshold: return "threshold:" + std::to_string(threshold);
      case Kind::Explicit: return "explicit:" + std::to_string(edges.size());
    }
    return "";
  }
};

/// Positions in g.edges() that make up the regime's edge set.
inline std::vector<int> resolve(const ComparisonGraph& g, const Regime& r) {
  std::vector<int> out;
  switch (r.kind) {
    case Regime::Kind::All:
      out.resize(g.edge_count());
      std::iota(out.begin(), out.end(), 0);
      break;
    case Regime::Kind::Threshold:
      for (std::size_t p = 0; p < g.edge_count(); ++p)
        if (g.edges()[p].n >= r.threshold) out.push_back(static_cast<int>(p));
      break;
    case Regime::Kind::Explicit:
      for (auto [i, j] : r.edges) {
        if (i < 0 || j < 0 || i >= g.K() || j >= g.K() || i == j)
          throw Error(Errc::IndexOutOfRange, "regime edge out of range");
        const int p = g.edge_pos(i, j);
        if (p < 0) throw Error(Errc::NoEdge, "regime edge was never compared");
        out.push_back(p);
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      break;
  }
  return out;
}

inline std::vector<int> resolve_nonempty(const ComparisonGraph& g, const Regime& r) {
  auto e = resolve(g, r);
  if (e.empty()) throw Error(Errc::EmptyRegime, "regime " + r.label() + " selects no edges");
  return e;
}

/// Σ_{E_s} n_ij (ȳ_ij - (μ̂_i - μ̂_j))², with μ̂ fitted on the whole graph.
inline double statistic_r(const ComparisonGraph& g, const Regime& r, const Vector& mu) {
  const auto es = resolve_nonempty(g, r);
  double s = 0.0;
  for (int p : es) {
    const Edge& e = g.edges()[static_cast<std::size_t>(p)];
    const double d = e.mean - (mu(e.i) - mu(e.j));
    s += e.n * d * d;
  }
  return s;
}

inline double statistic_r(const ComparisonGraph& g, const Regime& r) {
  return statistic_r(g, r, fit_merits(g));
}

/// Laplacian pseudoinverse with its nullity checked against connectivity.
inline Matrix laplacian_pinv(const ComparisonGraph& g) {
  require_connected(g);
  const SpectralForm sf = sym_eig(laplacian(g));
  if (sf.rank != g.K() - 1)
    throw std::logic_error("laplacian rank " + std::to_string(sf.rank) + " on a connected graph");
  return pinv(sf);
}

/// Ω_s on the E_s block: σ²(I - D_s^{1/2} A_s N⁺ A_sᵀ D_s^{1/2}).
inline Matrix omega_block(const ComparisonGraph& g, const Regime& r, double sigma2) {
  const auto es = resolve_nonempty(g, r);
  const Matrix np = laplacian_pinv(g);
  const Index d = static_cast<Index>(es.size());
  Matrix om(d, d);
  for (Index a = 0; a < d; ++a) {
    const Edge& e = g.edges()[static_cast<std::size_t>(es[static_cast<std::size_t>(a)])];
    for (Index b = 0; b <= a; ++b) {
      const Edge& f = g.edges()[static_cast<std::size_t>(es[static_cast<std::size_t>(b)])];
      const double k = np(e.i, f.i) - np(e.i, f.j) - np(e.j, f.i) + np(e.j, f.j);
      const double v = (a == b ? 1.0 : 0.0) - std::sqrt(static_cast<double>(e.n) * f.n) * k;
      om(a, b) = om(b, a) = sigma2 * v;
    }
  }
  return om;
}

inline SpectralForm omega_matrix(const ComparisonGraph& g, const Regime& r, double sigma2) {
  SpectralForm sf = sym_eig(omega_block(g, r, sigma2), true, kAssembledRankTol * sigma2);
  if (r.kind == Regime::Kind::All) {
    const Index expect = static_cast<Index>(g.edge_count()) - (g.K() - 1);
    if (sf.rank != expect)
      throw std::logic_error("omega rank " + std::to_string(sf.rank) + ", expected " +
                             std::to_string(expect));
  }
  return sf;
}

/// The projector form of Ω1,
/// σ²(D⁺)^{1/2}(I - B(BᵀDB)⁺BᵀD) D⁺ (I - B(BᵀDB)⁺BᵀD)ᵀ(D⁺)^{1/2}, on the E1 block.
/// Kept for cross-checking against omega_block.
inline Matrix omega_projector_form(const ComparisonGraph& g, double sigma2) {
  std::vector<int> all(g.edge_count());
  std::iota(all.begin(), all.end(), 0);
  const Matrix a = edge_incidence(g, all);
  Vector w(static_cast<Index>(all.size()));
  for (std::size_t p = 0; p < all.size(); ++p) w(static_cast<Index>(p)) = g.edges()[p].n;
  const Matrix np = pinv(Matrix(a.transpose() * w.asDiagonal() * a));
  const Matrix proj = Matrix::Identity(a.rows(), a.rows()) - a * np * a.transpose() * w.asDiagonal();
  const Vector dinv = w.cwiseInverse();
  const Vector dinv_sqrt = dinv.cwiseSqrt();
  return sigma2 * dinv_sqrt.asDiagonal() * proj * dinv.asDiagonal() * proj.transpose() *
         dinv_sqrt.asDiagonal();
}

/// Nonzero null eigenvalues of Ω_s. For the full edge set Ω1 is σ² times an
/// orthogonal projector, so its spectrum is known exactly.
inline Vector null_spectrum(const ComparisonGraph& g, const Regime& r, double sigma2) {
  if (r.kind == Regime::Kind::All) {
    require_connected(g);
    resolve_nonempty(g, r);
    const Index rank = static_cast<Index>(g.edge_count()) - (g.K() - 1);
    return Vector::Constant(rank, sigma2);
  }
  return sym_eig(omega_block(g, r, sigma2), false, kAssembledRankTol * sigma2).nonzero();
}

namespace detail {
struct EigGroup {
  double lambda;
  int mult;
};

inline std::vector<EigGroup> group_eigenvalues(const Vector& lambdas) {
  std::vector<double> v(lambdas.data(), lambdas.data() + lambdas.size());
  std::sort(v.begin(), v.end(), std::greater<>());
  std::vector<EigGroup> out;
  const double tol = v.empty() ? 0.0 : 1e-12 * std::abs(v.front());
  for (double x : v) {
    if (x <= 0) continue;
    if (!out.empty() && std::abs(out.back().lambda - x) <= tol)
      ++out.back().mult;
    else
      out.push_back({x, 1});
  }
  return out;
}

inline constexpr std::size_t kNullChunk = 1024;
}  // namespace detail

/// Draws of Σ λ_i Z_i². Equal eigenvalues are drawn as λ·χ²_k. Chunk c of
/// kNullChunk draws uses rng.child(c), so output ignores the thread count.
inline std::vector<double> null_sample(const Vector& lambdas, std::size_t draws,
                                       const RngStream& rng, int threads = 0) {
  const auto groups = detail::group_eigenvalues(lambdas);
  std::vector<double> out(draws, 0.0);
  if (groups.empty() || draws == 0) return out;
  const std::size_t chunks = (draws + detail::kNullChunk - 1) / detail::kNullChunk;
  parallel_for(chunks, [&](std::size_t c) {
    Engine eng = rng.child(c).engine();
    std::vector<std::chi_squared_distribution<double>> dist;
    dist.reserve(groups.size());
    for (const auto& gr : groups) dist.emplace_back(gr.mult);
    const std::size_t lo = c * detail::kNullChunk, hi = std::min(draws, lo + detail::kNullChunk);
    for (std::size_t d = lo; d < hi; ++d) {
      double s = 0.0;
      for (std::size_t k = 0; k < groups.size(); ++k) s += groups[k].lambda * dist[k](eng);
      out[d] = s;
    }
  }, threads);
  return out;
}

/// (1 + #{null ≥ t}) / (draws + 1); ties count as exceedances.
inline double mc_p_value(double t, const std::vector<double>& null) {
  std::size_t ge = 0;
  for (double x : null) ge += x >= t;
  return (1.0 + static_cast<double>(ge)) / (static_cast<double>(null.size()) + 1.0);
}

/// Sorted null sample for repeated p-value lookups.
class NullCalibration {
 public:
  NullCalibration() = default;
  explicit NullCalibration(std::vector<double> draws) : sorted_(std::move(draws)) {
    std::sort(sorted_.begin(), sorted_.end());
  }
  std::size_t draws() const { return sorted_.size(); }
  /// p-value of t against scale·X.
  double p_value(double t, double scale = 1.0) const {
    const double thr = t / scale;
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), thr);
    const auto ge = static_cast<double>(sorted_.end() - it);
    return (1.0 + ge) / (static_cast<double>(sorted_.size()) + 1.0);
  }

 private:
  std::vector<double> sorted_;
};

struct Noncentrality {
  Vector lambda;
  Vector phi;
  /// E[Σ λ (Z + φ)²].
  double mean() const { return lambda.sum() + lambda.dot(phi.cwiseAbs2()); }
};

inline void require_cyclic(const PreferenceProfile& delta) {
  const double norm = delta.values.norm();
  const double lin = decompose(delta).linear.values.norm();
  if (lin > 1e-8 * std::max(norm, 1e-300) && norm > 0)
    throw Error(Errc::DeltaNotCyclic, "delta has a component in the linear space");
}

/// φ such that R_s ~ Σ λ_i (Z_i + φ_i)² under ν = Bμ + δ.
inline Noncentrality noncentrality(const ComparisonGraph& g, const Regime& r,
                                   const PreferenceProfile& delta, double sigma2) {
  if (delta.K != g.K()) throw Error(Errc::InvalidArgument, "delta has the wrong K");
  require_cyclic(delta);
  const auto es = resolve_nonempty(g, r);
  const Matrix np = laplacian_pinv(g);
  Vector t = Vector::Zero(g.K());
  for (const auto& e : g.edges()) {
    const double v = e.n * delta(e.i, e.j);
    t(e.i) += v;
    t(e.j) -= v;
  }
  const Vector u = np * t;
  Vector m(static_cast<Index>(es.size()));
  for (std::size_t a = 0; a < es.size(); ++a) {
    const Edge& e = g.edges()[static_cast<std::size_t>(es[a])];
    m(static_cast<Index>(a)) = std::sqrt(static_cast<double>(e.n)) * (delta(e.i, e.j) - (u(e.i) - u(e.j)));
  }
  const SpectralForm sf = sym_eig(omega_block(g, r, sigma2), true, kAssembledRankTol * sigma2);
  Noncentrality out;
  out.lambda = sf.nonzero();
  out.phi = Vector(sf.rank);
  for (Index i = 0; i < sf.rank; ++i)
    out.phi(i) = sf.eigenvectors.col(i).dot(m) / std::sqrt(sf.eigenvalues(i));
  return out;
}

struct LofOptions {
  double alpha = 0.05;
  std::size_t draws = 9999;
  std::optional<double> sigma2;  // overrides the pooled estimate
  int threads = 0;
};

/// σ² to use in calibration and where it came from.
inline std::pair<double, std::string> resolve_sigma2(const ComparisonGraph& g,
                                                     const std::optional<double>& supplied) {
  if (supplied) {
    if (!(*supplied > 0)) throw Error(Errc::InvalidArgument, "sigma2 must be positive");
    return {*supplied, "supplied"};
  }
  const auto est = pooled_within_variance(g);
  if (!est) throw Error(Errc::SigmaUnidentifiable, "every pair has at most one comparison; supply sigma2");
  if (!(*est > 0)) throw Error(Errc::SigmaUnidentifiable, "pooled within-pair variance is zero");
  return {*est, "pooled-within"};
}

inline TestReport lof_test(const ComparisonGraph& g, const Regime& r, const LofOptions& opt,
                           const RngStream& rng) {
  require_connected(g);
  TestReport rep;
  rep.test = "lof-fixed";
  rep.regime = r.label();
  rep.alpha = opt.alpha;
  rep.seed = rng.seed;
  rep.stream = rng.index;
  const auto [s2, src] = resolve_sigma2(g, opt.sigma2);
  rep.sigma2 = s2;
  rep.sigma2_source = src;
  rep.statistic = statistic_r(g, r);
  rep.eigenvalues = null_spectrum(g, r, s2);
  rep.rank = rep.eigenvalues.size();
  rep.draws = static_cast<long>(opt.draws);
  if (rep.rank == 0) {
    rep.statistic = 0.0;
    rep.p_value = 1.0;
    rep.warnings.push_back("degenerate: null covariance has rank 0, statistic is identically zero");
  } else {
    rep.p_value = mc_p_value(rep.statistic, null_sample(rep.eigenvalues, opt.draws, rng, opt.threads));
  }
  rep.decide();
  return rep;
}

struct Detectability {
  bool forest = false;      // E_s has no cycle
  bool degenerate = false;  // Ω_s has rank 0
  long rank = 0;
  std::optional<long> supporting_triads;  // δ-inconsistent triads inside E_s
  bool powerless = false;
  std::vector<std::string> reasons;
};

inline Detectability detectability(const ComparisonGraph& g, const Regime& r,
                                   const std::optional<PreferenceProfile>& delta = std::nullopt) {
  Detectability d;
  const auto es = resolve_nonempty(g, r);
  UnionFind uf(g.K());
  d.forest = true;
  std::vector<bool> mask(n_pairs(g.K()), false);
  for (int p : es) {
    const Edge& e = g.edges()[static_cast<std::size_t>(p)];
    mask[pair_index(e.i, e.j, g.K())] = true;
    if (!uf.unite(e.i, e.j)) d.forest = false;
  }
  d.rank = null_spectrum(g, r, 1.0).size();
  d.degenerate = d.rank == 0;
  if (d.degenerate) d.reasons.emplace_back("null covariance has rank 0: the statistic is identically zero");
  if (d.forest) d.reasons.emplace_back("edge set is a forest: it contains no triad");
  if (delta) {
    if (delta->K != g.K()) throw Error(Errc::InvalidArgument, "delta has the wrong K");
    d.supporting_triads = static_cast<long>(inconsistent_triads(*delta, mask).size());
    if (*d.supporting_triads == 0)
      d.reasons.emplace_back("edge set contains no triad that is inconsistent under delta");
  }
  d.powerless = d.degenerate || d.forest || (d.supporting_triads && *d.supporting_triads == 0);
  return d;
}

}  // namespace lofpc
