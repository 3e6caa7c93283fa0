#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lofpc/lofpc.hpp"

namespace lofpc::cli {

struct McFlags {
  double alpha = 0.05;
  std::size_t draws = 9999;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma2;
  int threads = 0;
};

inline std::uint64_t require_seed(const McFlags& f) {
  if (!f.seed) throw Error(Errc::InvalidArgument, "--seed is required for Monte Carlo calibration");
  return *f.seed;
}

inline Json items_1based(const std::vector<int>& v) {
  Json a = Json::array();
  for (int i : v) a.push_back(i + 1);
  return a;
}

inline Json cmd_fit(const std::string& path, std::optional<int> items) {
  const ComparisonGraph g = read_comparisons_file(path, items);
  Json j = report_envelope("fit");
  j["input"] = path;
  j["items"] = g.K();
  j["edges"] = g.edge_count();
  j["comparisons"] = g.total_n();
  j["connected"] = g.connected();
  j["components"] = g.components();
  std::map<int, long> hist;
  hist[0] = static_cast<long>(n_pairs(g.K()) - g.edge_count());
  for (const auto& e : g.edges()) ++hist[e.n];
  Json h = Json::array();
  for (auto [n, c] : hist)
    if (c) h.push_back({{"count", n}, {"pairs", c}});
  j["count_histogram"] = h;
  require_connected(g);
  const FitResult fit = lse_fit(g);
  j["mu_hat"] = to_json(fit.mu_hat);
  j["sigma2_hat"] = fit.sigma2_hat ? Json(*fit.sigma2_hat) : Json(nullptr);
  j["m_bottleneck"] = fit.m_bottleneck;
  return j;
}

inline Json cmd_test_fixed(const std::string& path, const std::string& regime, const McFlags& f,
                           std::optional<int> items) {
  const ComparisonGraph g = read_comparisons_file(path, items);
  const Regime r = parse_regime(regime);
  LofOptions o;
  o.alpha = f.alpha;
  o.draws = f.draws;
  o.sigma2 = f.sigma2;
  o.threads = f.threads;
  const TestReport rep = lof_test(g, r, o, RngStream(require_seed(f)));
  Json j = report_envelope("test fixed");
  j["input"] = path;
  j["report"] = to_json(rep);
  const Detectability d = detectability(g, r);
  j["diagnostics"] = {{"forest", d.forest}, {"degenerate", d.degenerate}, {"reasons", d.reasons}};
  return j;
}

struct LargeFlags {
  std::optional<std::string> candidates;
  std::optional<std::size_t> bootstrap;
  bool closed_form = false;
  std::string center = "refit-u";
  std::optional<double> p_k;
};

inline BootstrapCenter parse_center(const std::string& s) {
  if (s == "refit-u") return BootstrapCenter::RefitU;
  if (s == "full-graph") return BootstrapCenter::FullGraph;
  throw Error(Errc::InvalidArgument, "--center must be refit-u or full-graph");
}

inline Json cmd_test_large(const std::string& path, const LargeFlags& lf, const McFlags& f,
                           std::optional<int> items) {
  const ComparisonGraph g = read_comparisons_file(path, items);
  Json j = report_envelope("test large");
  j["input"] = path;
  if (!lf.candidates) {
    if (lf.bootstrap || lf.closed_form)
      throw Error(Errc::InvalidArgument, "--bootstrap and --closed-form need --candidates");
    j["report"] = to_json(rmk_test(g, f.alpha, f.sigma2));
    return j;
  }
  if (lf.bootstrap && lf.closed_form)
    throw Error(Errc::InvalidArgument, "--bootstrap and --closed-form are exclusive");
  const auto split = LocalizedSplit::make(parse_item_list(*lf.candidates), g.K());
  LocalizedOptions o;
  o.boot.alpha = f.alpha;
  o.boot.threads = f.threads;
  o.boot.center = parse_center(lf.center);
  if (lf.closed_form) {
    o.mode = LocalizedMode::ClosedForm;
    j["report"] = to_json(localized_test(g, split, o, RngStream(0)));
  } else {
    o.boot.B = lf.bootstrap.value_or(499);
    j["report"] = to_json(localized_test(g, split, o, RngStream(require_seed(f))));
  }
  j["candidates"] = items_1based(split.U);
  return j;
}

inline Json cmd_test_sparse(const std::string& path, const LargeFlags& lf, const McFlags& f,
                            std::optional<int> items) {
  if (!lf.candidates) throw Error(Errc::InvalidArgument, "test sparse needs --candidates");
  if (lf.closed_form) throw Error(Errc::InvalidArgument, "test sparse has no closed form");
  const ComparisonGraph g = read_comparisons_file(path, items);
  const auto split = LocalizedSplit::make(parse_item_list(*lf.candidates), g.K());
  BootstrapOptions o;
  o.alpha = f.alpha;
  o.B = lf.bootstrap.value_or(499);
  o.center = parse_center(lf.center);
  o.threads = f.threads;
  const TestReport rep = random_graph_test(g, split, lf.p_k, o, RngStream(require_seed(f)));
  const SparseStatistics st = sparse_statistics(g, split);
  Json j = report_envelope("test sparse");
  j["input"] = path;
  j["candidates"] = items_1based(split.U);
  j["report"] = to_json(rep);
  j["sparse"] = {{"R_J", st.r_j},         {"R_K", st.r_k},         {"psi2_estimate", st.psi2_estimate},
                 {"triads", st.triads},   {"u_edges", st.u_edges}, {"edges", st.v_edges},
                 {"diagnostics", st.diagnostics}};
  return j;
}

inline Json cmd_test_ks(const std::string& path, bool cardinal, const McFlags& f, std::optional<int> items) {
  const ComparisonGraph g = read_comparisons_file(path, items);
  const auto which = cardinal ? CountStatistic::Cardinal : CountStatistic::KendallSmith;
  const double s2 = f.sigma2 ? *f.sigma2 : resolve_sigma2(g, std::nullopt).first;
  const CountCalibration cal = calibrate_count_test(g, Vector::Zero(g.K()), std::sqrt(s2), which, f.draws,
                                                    f.alpha, RngStream(require_seed(f)), f.threads);
  TestReport rep = count_test(g, which, cal, s2);
  rep.seed = *f.seed;
  rep.sigma2 = s2;
  rep.sigma2_source = f.sigma2 ? "supplied" : "pooled-within";
  Json j = report_envelope("test ks");
  j["input"] = path;
  j["report"] = to_json(rep);
  j["calibration_merits"] = "zero";
  return j;
}

inline Json cmd_test_f(const std::string& path, const std::optional<std::string>& candidates, double alpha,
                       std::optional<int> items) {
  if (!candidates) throw Error(Errc::InvalidArgument, "test f needs --candidates i-j-k[,i-j-k...]");
  const ComparisonGraph g = read_comparisons_file(path, items);
  const auto triads = parse_triad_list(*candidates);
  for (const auto& t : triads)
    if (t.k >= g.K()) throw Error(Errc::IndexOutOfRange, "candidate triad exceeds the item count");
  Json j = report_envelope("test f");
  j["input"] = path;
  Json c = Json::array();
  for (const auto& t : triads) c.push_back({t.i + 1, t.j + 1, t.k + 1});
  j["candidates"] = c;
  j["report"] = to_json(f_test(g, triads, alpha));
  return j;
}

inline Json cmd_simulate(const std::string& path, std::optional<long> reps, int threads,
                         const std::optional<std::string>& tsv) {
  auto scenarios = read_scenarios_file(path);
  Json j = report_envelope("simulate");
  j["config"] = path;
  Json arr = Json::array();
  std::vector<PowerTable> tables;
  for (auto& s : scenarios) {
    if (reps) s.replications = *reps;
    tables.push_back(power_study(s, threads));
    Json t = to_json(tables.back());
    t["null_draws"] = s.null_draws;
    t["per_rep_draws"] = s.per_rep_draws;
    arr.push_back(t);
  }
  j["tables"] = arr;
  if (tsv) {
    std::ofstream out(*tsv);
    if (!out) throw Error(Errc::InvalidArgument, *tsv + ": cannot write");
    write_power_tsv(out, tables);
  }
  return j;
}

struct SeasonFlags {
  std::vector<double> alphas{0.05, 0.10};
  std::size_t graphs = 1000;
  std::size_t bootstrap = 499;
  std::size_t draws = 9999;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

inline std::vector<std::string> season_files(const std::vector<std::string>& inputs) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (!fs::exists(in)) throw Error(Errc::ParseError, in + ": season file not found");
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& de : fs::directory_iterator(in))
        if (de.is_regular_file() && de.path().extension() == ".csv") found.push_back(de.path().string());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw Error(Errc::NoData, in + ": no .csv season files");
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  return files;
}

inline Json cmd_seasons(const std::vector<std::string>& inputs, const SeasonFlags& f,
                        const std::optional<std::string>& tsv) {
  if (!f.seed) throw Error(Errc::InvalidArgument, "--seed is required");
  std::vector<Game> games;
  const auto files = season_files(inputs);
  for (const auto& p : files) {
    auto g = read_games_file(p);
    games.insert(games.end(), g.begin(), g.end());
  }
  const SeasonPanel panel = build_panel(games);
  const RngStream root(*f.seed);
  Json j = report_envelope("seasons");
  j["files"] = files;
  j["teams"] = panel.teams;
  auto names = [&](const std::vector<int>& ids) {
    Json a = Json::array();
    for (int i : ids) a.push_back(panel.teams[static_cast<std::size_t>(i)]);
    return a;
  };
  std::vector<std::vector<int>> sets;
  Json seasons = Json::array();
  for (std::size_t t = 0; t < panel.seasons.size(); ++t) {
    const ComparisonGraph& g = panel.graphs[t];
    const CyclicTeams ct = cyclic_teams(g);
    sets.push_back(ct.teams);
    Json s;
    s["season"] = panel.seasons[t];
    s["games"] = g.total_n();
    s["cyclic_triads"] = ct.initial_triads;
    s["cyclic_teams"] = names(ct.teams);
    s["removal_order"] = names(ct.removal_order);
    try {
      LofOptions o;
      o.alpha = f.alphas.front();
      o.draws = f.draws;
      o.threads = f.threads;
      const TestReport rep = lof_test(g, Regime::all(), o, root.child(1000 + t));
      s["lof_all"] = {{"statistic", rep.statistic}, {"p_value", rep.p_value}, {"draws", rep.draws}};
    } catch (const Error& e) {
      s["lof_all"] = {{"error", e.what()}};
    }
    seasons.push_back(s);
  }
  j["seasons"] = seasons;

  Json jac = Json::array();
  for (const auto& a : sets) {
    Json row = Json::array();
    for (const auto& b : sets) row.push_back(jaccard(a, b));
    jac.push_back(row);
  }
  j["jaccard"] = jac;

  if (sets.size() >= 2) {
    const Transitions tr = markov_transitions(membership_states(sets, panel.K()));
    Json rows = Json::array();
    for (int k = 0; k < 2; ++k)
      rows.push_back(tr.defined[k] ? Json::array({tr.p[k][0], tr.p[k][1]}) : Json(nullptr));
    j["transitions"] = {{"p", rows},
                        {"counts", {{tr.counts[0][0], tr.counts[0][1]}, {tr.counts[1][0], tr.counts[1][1]}}},
                        {"diagnostics", tr.diagnostics}};
  }

  Json pred = Json::array();
  for (std::size_t t = 0; t + 1 < panel.seasons.size(); ++t) {
    Json p;
    p["season"] = panel.seasons[t];
    p["future"] = panel.seasons[t + 1];
    try {
      const Prediction pr = predict_next_season(panel, t, f.alphas, f.graphs, f.bootstrap, root.child(2000 + t), f.threads);
      p["candidates"] = names(pr.candidates);
      p["graphs"] = pr.graphs;
      p["bootstrap"] = pr.inner_B;
      Json r = Json::array();
      for (std::size_t a = 0; a < pr.alphas.size(); ++a) r.push_back({{"alpha", pr.alphas[a]}, {"rejection", pr.rejection[a]}});
      p["rejection"] = r;
    } catch (const Error& e) {
      p["error"] = e.what();
    }
    pred.push_back(p);
  }
  j["prediction"] = pred;
  j["calibration"] = {{"seed", *f.seed}, {"graphs", f.graphs}, {"bootstrap", f.bootstrap}, {"draws", f.draws}};

  if (tsv) {
    std::ofstream out(*tsv);
    if (!out) throw Error(Errc::InvalidArgument, *tsv + ": cannot write");
    out << "season";
    for (const auto& s : panel.seasons) out << '\t' << s;
    out << '\n';
    for (std::size_t a = 0; a < sets.size(); ++a) {
      out << panel.seasons[a];
      for (std::size_t b = 0; b < sets.size(); ++b) out << '\t' << format_double(jaccard(sets[a], sets[b]));
      out << '\n';
    }
  }
  return j;
}

inline void cmd_export(const std::string& path, std::optional<int> items, std::ostream& out) {
  write_comparisons(out, read_comparisons_file(path, items));
}

}  // namespace lofpc::cli
