#pragma once

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lofpc/baselines.hpp"
#include "lofpc/graph.hpp"
#include "lofpc/lof_fixed.hpp"
#include "lofpc/lof_large.hpp"
#include "lofpc/report.hpp"
#include "lofpc/seasons.hpp"
#include "lofpc/simulate.hpp"
#include "lofpc/version.hpp"

namespace lofpc {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& src, long line, const std::string& msg) {
  throw Error(Errc::ParseError, src + ":" + std::to_string(line) + ": " + msg);
}

inline long parse_long(std::string_view s, const std::string& src, long line, const char* field) {
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    parse_fail(src, line, std::string("field ") + field + " is not an integer: '" + std::string(s) + "'");
  return v;
}

inline double parse_real(std::string_view s, const std::string& src, long line, const char* field) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    parse_fail(src, line, std::string("field ") + field + " is not a finite number: '" + std::string(s) + "'");
  return v;
}

/// Reads the header and returns false at EOF on an empty stream.
inline bool expect_header(std::istream& in, const std::string& src, std::string_view header, long& line) {
  std::string s;
  while (std::getline(in, s)) {
    ++line;
    if (line == 1 && s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF) s.erase(0, 3);  // BOM
    const auto t = trim(s);
    if (t.empty()) continue;
    std::string norm;
    for (auto f : split_csv(t)) norm += (norm.empty() ? "" : ",") + std::string(f);
    if (norm != header) parse_fail(src, line, "expected header '" + std::string(header) + "'");
    return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Comparisons: header i,j,y; 1-based items.

/// Parsed comparison rows. K defaults to the largest item id seen.
inline ComparisonGraph read_comparisons(std::istream& in, const std::string& src = "<input>",
                                        std::optional<int> items = std::nullopt) {
  long line = 0;
  if (!detail::expect_header(in, src, "i,j,y", line)) throw Error(Errc::NoData, src + ": empty input");
  struct Row {
    long i, j;
    double y;
    long line;
  };
  std::vector<Row> rows;
  std::string s;
  long max_id = 0;
  while (std::getline(in, s)) {
    ++line;
    const auto t = detail::trim(s);
    if (t.empty()) continue;
    const auto f = detail::split_csv(t);
    if (f.size() != 3) detail::parse_fail(src, line, "expected 3 fields, got " + std::to_string(f.size()));
    Row r{detail::parse_long(f[0], src, line, "i"), detail::parse_long(f[1], src, line, "j"),
          detail::parse_real(f[2], src, line, "y"), line};
    if (r.i < 1 || r.j < 1) detail::parse_fail(src, line, "item ids start at 1");
    if (r.i == r.j) detail::parse_fail(src, line, "item compared with itself");
    max_id = std::max({max_id, r.i, r.j});
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(Errc::NoData, src + ": no comparison rows");
  const long K = items ? *items : std::max(max_id, 2L);
  if (max_id > K) throw Error(Errc::IndexOutOfRange, src + ": item id " + std::to_string(max_id) + " exceeds --items");
  GraphBuilder b(static_cast<int>(K));
  for (const auto& r : rows) b.add(static_cast<int>(r.i - 1), static_cast<int>(r.j - 1), r.y);
  return b.build();
}

inline ComparisonGraph read_comparisons_file(const std::string& path, std::optional<int> items = std::nullopt) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::ParseError, path + ": cannot open file");
  return read_comparisons(f, path, items);
}

/// Rows in pair order, samples in stored order, i < j.
inline void write_comparisons(std::ostream& out, const ComparisonGraph& g) {
  out << "i,j,y\n";
  for (const auto& e : g.edges())
    for (double y : g.samples(e)) out << e.i + 1 << ',' << e.j + 1 << ',' << format_double(y) << '\n';
}

// ---------------------------------------------------------------------------
// Games: header season,home,away,home_score,away_score

inline std::vector<Game> read_games(std::istream& in, const std::string& src = "<input>") {
  long line = 0;
  if (!detail::expect_header(in, src, "season,home,away,home_score,away_score", line))
    throw Error(Errc::NoData, src + ": empty input");
  std::vector<Game> games;
  std::string s;
  while (std::getline(in, s)) {
    ++line;
    const auto t = detail::trim(s);
    if (t.empty()) continue;
    const auto f = detail::split_csv(t);
    if (f.size() != 5) detail::parse_fail(src, line, "expected 5 fields, got " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty() || f[2].empty()) detail::parse_fail(src, line, "empty season or team");
    if (f[1] == f[2]) detail::parse_fail(src, line, "team plays itself");
    games.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]),
                     detail::parse_real(f[3], src, line, "home_score"),
                     detail::parse_real(f[4], src, line, "away_score")});
  }
  if (games.empty()) throw Error(Errc::NoData, src + ": no game rows");
  return games;
}

inline std::vector<Game> read_games_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::ParseError, path + ": cannot open season file");
  return read_games(f, path);
}

// ---------------------------------------------------------------------------
// Regimes and lists given on the command line or in configs

inline Regime parse_regime(std::string_view s) {
  if (s == "all") return Regime::all();
  constexpr std::string_view pre = "threshold:";
  if (s.substr(0, pre.size()) == pre) {
    const auto v = s.substr(pre.size());
    int t = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), t);
    if (r.ec == std::errc() && r.ptr == v.data() + v.size() && t >= 1) return Regime::at_least(t);
  }
  throw Error(Errc::InvalidArgument, "regime must be 'all' or 'threshold:T' with T >= 1, got '" + std::string(s) + "'");
}

/// "1,2,3" -> {0,1,2}.
inline std::vector<int> parse_item_list(std::string_view s) {
  std::vector<int> out;
  for (auto f : detail::split_csv(s)) {
    int v = 0;
    const auto r = std::from_chars(f.data(), f.data() + f.size(), v);
    if (r.ec != std::errc() || r.ptr != f.data() + f.size() || v < 1)
      throw Error(Errc::InvalidArgument, "bad item id '" + std::string(f) + "'");
    out.push_back(v - 1);
  }
  return out;
}

/// "1-2-3,1-2-4" -> triads (0-based, sorted within each triad).
inline std::vector<Triad> parse_triad_list(std::string_view s) {
  std::vector<Triad> out;
  for (auto f : detail::split_csv(s)) {
    std::vector<int> ids;
    std::size_t start = 0;
    for (;;) {
      const auto pos = f.find('-', start);
      const auto part = f.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
      int v = 0;
      const auto r = std::from_chars(part.data(), part.data() + part.size(), v);
      if (r.ec != std::errc() || r.ptr != part.data() + part.size() || v < 1)
        throw Error(Errc::InvalidArgument, "bad triad '" + std::string(f) + "'");
      ids.push_back(v - 1);
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (ids.size() != 3) throw Error(Errc::InvalidArgument, "triad needs three items: '" + std::string(f) + "'");
    std::sort(ids.begin(), ids.end());
    if (ids[0] == ids[1] || ids[1] == ids[2]) throw Error(Errc::InvalidArgument, "triad items must differ");
    out.push_back({ids[0], ids[1], ids[2]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario configs (JSON)

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& msg) {
  throw Error(Errc::ConfigError, path + ": " + msg);
}

template <class T>
T cfg_get(const Json& j, const std::string& key, const std::string& path) {
  const std::string p = path.empty() ? key : path + "." + key;
  if (!j.contains(key)) config_fail(p, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_fail(p, "wrong type");
  }
}

template <class T>
T cfg_or(const Json& j, const std::string& key, const std::string& path, T dflt) {
  if (!j.contains(key)) return dflt;
  return cfg_get<T>(j, key, path);
}

inline Triad cfg_triad(const Json& j, const std::string& path, int K) {
  if (!j.is_array() || j.size() != 3) config_fail(path, "triad must be [i, j, k]");
  std::vector<int> v;
  for (const auto& x : j) {
    if (!x.is_number_integer()) config_fail(path, "triad entries must be integers");
    v.push_back(x.get<int>() - 1);
  }
  std::sort(v.begin(), v.end());
  if (v[0] < 0 || v[2] >= K || v[0] == v[1] || v[1] == v[2]) config_fail(path, "triad out of range");
  return {v[0], v[1], v[2]};
}

inline Vector cfg_vector(const Json& j, const std::string& path) {
  if (!j.is_array()) config_fail(path, "must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t a = 0; a < j.size(); ++a) {
    if (!j[a].is_number()) config_fail(path + "[" + std::to_string(a) + "]", "must be a number");
    v(static_cast<Index>(a)) = j[a].get<double>();
  }
  return v;
}

inline TestSpec cfg_test(const Json& j, const std::string& path, int K) {
  if (!j.is_object()) config_fail(path, "must be an object");
  TestSpec t;
  const auto kind = cfg_get<std::string>(j, "kind", path);
  t.name = cfg_or<std::string>(j, "name", path, kind);
  if (kind == "lof") {
    t.kind = TestSpec::Kind::Lof;
    try {
      t.regime = parse_regime(cfg_or<std::string>(j, "regime", path, "all"));
    } catch (const Error& e) {
      config_fail(path + ".regime", e.what());
    }
  } else if (kind == "ks") {
    t.kind = TestSpec::Kind::KendallSmith;
  } else if (kind == "ks_card") {
    t.kind = TestSpec::Kind::Cardinal;
  } else if (kind == "f") {
    t.kind = TestSpec::Kind::F;
    if (!j.contains("candidates") || !j["candidates"].is_array()) config_fail(path + ".candidates", "missing");
    for (std::size_t a = 0; a < j["candidates"].size(); ++a)
      t.candidates.push_back(cfg_triad(j["candidates"][a], path + ".candidates[" + std::to_string(a) + "]", K));
  } else if (kind == "localized" || kind == "random_graph") {
    t.kind = kind == "localized" ? TestSpec::Kind::Localized : TestSpec::Kind::RandomGraph;
    const Vector u = cfg_vector(j.contains("U") ? j["U"] : Json(), path + ".U");
    for (Index a = 0; a < u.size(); ++a) t.U.push_back(static_cast<int>(u(a)) - 1);
    t.B = cfg_or<std::size_t>(j, "B", path, 499);
    const auto mode = cfg_or<std::string>(j, "mode", path, "bootstrap");
    if (mode == "bootstrap")
      t.mode = LocalizedMode::Bootstrap;
    else if (mode == "closed_form")
      t.mode = LocalizedMode::ClosedForm;
    else
      config_fail(path + ".mode", "must be 'bootstrap' or 'closed_form'");
    const auto center = cfg_or<std::string>(j, "center", path, "refit-u");
    if (center == "refit-u")
      t.center = BootstrapCenter::RefitU;
    else if (center == "full-graph")
      t.center = BootstrapCenter::FullGraph;
    else
      config_fail(path + ".center", "must be 'refit-u' or 'full-graph'");
  } else if (kind == "rmk") {
    t.kind = TestSpec::Kind::Rmk;
  } else {
    config_fail(path + ".kind", "unknown test kind '" + kind + "'");
  }
  return t;
}

inline Scenario cfg_scenario(const Json& j, const std::string& path) {
  if (!j.is_object()) config_fail(path, "must be an object");
  Scenario s;
  s.name = cfg_or<std::string>(j, "name", path, "scenario");
  s.K = cfg_get<int>(j, "K", path);
  if (s.K < 3) config_fail(path + ".K", "must be at least 3");
  const std::string cp = path.empty() ? "counts" : path + ".counts";
  if (!j.contains("counts") || !j["counts"].is_object()) config_fail(cp, "missing");
  const Json& c = j["counts"];
  const auto scheme = cfg_get<std::string>(c, "scheme", cp);
  if (scheme == "fixed") {
    s.counts.kind = CountScheme::Kind::FixedM;
    s.counts.m = cfg_get<int>(c, "m", cp);
  } else if (scheme == "binomial") {
    s.counts.kind = CountScheme::Kind::Binomial;
    s.counts.m = cfg_get<int>(c, "m", cp);
    s.counts.p = cfg_get<double>(c, "p", cp);
  } else if (scheme == "path") {
    s.counts.kind = CountScheme::Kind::Path;
  } else if (scheme == "erdos_renyi") {
    s.counts.kind = CountScheme::Kind::ErdosRenyi;
    s.counts.p = cfg_get<double>(c, "p", cp);
    s.counts.m = cfg_or<int>(c, "m", cp, 1);
  } else {
    config_fail(cp + ".scheme", "unknown scheme '" + scheme + "'");
  }
  const auto sub = [&](const char* k) { return path.empty() ? std::string(k) : path + "." + k; };
  if (j.contains("merits")) s.mu = cfg_vector(j["merits"], sub("merits"));
  if (j.contains("null_merits")) s.null_mu = cfg_vector(j["null_merits"], sub("null_merits"));
  if (j.contains("cyclic")) {
    if (!j["cyclic"].is_array()) config_fail(sub("cyclic"), "must be an array");
    for (std::size_t a = 0; a < j["cyclic"].size(); ++a) {
      const std::string p = sub("cyclic") + "[" + std::to_string(a) + "]";
      const Json& t = j["cyclic"][a];
      if (!t.is_object() || !t.contains("triad")) config_fail(p, "needs 'triad'");
      s.cyclic.push_back({cfg_triad(t["triad"], p + ".triad", s.K), cfg_or<double>(t, "gamma", p, 1.0)});
    }
  }
  s.sigma = cfg_or<double>(j, "sigma", path, 1.0);
  const auto s2 = cfg_or<std::string>(j, "sigma2", path, "known");
  if (s2 != "known" && s2 != "estimated") config_fail(sub("sigma2"), "must be 'known' or 'estimated'");
  s.sigma2_known = s2 == "known";
  s.replications = cfg_or<long>(j, "replications", path, 10000);
  s.seed = cfg_get<std::uint64_t>(j, "seed", path);
  s.alpha = cfg_or<double>(j, "alpha", path, 0.05);
  s.null_draws = cfg_or<std::size_t>(j, "null_draws", path, 100000);
  s.per_rep_draws = cfg_or<std::size_t>(j, "per_rep_draws", path, 999);
  if (!j.contains("tests") || !j["tests"].is_array()) config_fail(sub("tests"), "missing");
  for (std::size_t a = 0; a < j["tests"].size(); ++a)
    s.tests.push_back(cfg_test(j["tests"][a], sub("tests") + "[" + std::to_string(a) + "]", s.K));
  try {
    s.validate();
  } catch (const Error& e) {
    config_fail(path.empty() ? "scenario" : path, e.what());
  }
  return s;
}

}  // namespace detail

/// One scenario object, or {"defaults": {...}, "scenarios": [{...}, ...]}
/// where each entry is merged over the defaults.
inline std::vector<Scenario> parse_scenarios(const Json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config: top level must be an object");
  std::vector<Scenario> out;
  if (j.contains("scenarios")) {
    if (!j["scenarios"].is_array()) throw Error(Errc::ConfigError, "scenarios: must be an array");
    const Json defaults = j.value("defaults", Json::object());
    for (std::size_t a = 0; a < j["scenarios"].size(); ++a) {
      Json merged = defaults;
      merged.merge_patch(j["scenarios"][a]);
      out.push_back(detail::cfg_scenario(merged, "scenarios[" + std::to_string(a) + "]"));
    }
  } else {
    out.push_back(detail::cfg_scenario(j, ""));
  }
  return out;
}

inline std::vector<Scenario> read_scenarios_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::ConfigError, path + ": cannot open config");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
  return parse_scenarios(j);
}

// ---------------------------------------------------------------------------
// Reports

inline Json json_number(double x) {
  if (std::isfinite(x)) return x;
  return Json(format_double(x));
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(json_number(v(i)));
  return a;
}

inline Json to_json(const TestReport& r) {
  Json j;
  j["test"] = r.test;
  j["statistic"] = json_number(r.statistic);
  j["p_value"] = json_number(r.p_value);
  j["alpha"] = r.alpha;
  j["reject"] = r.reject;
  if (r.critical_value) j["critical_value"] = json_number(*r.critical_value);
  j["calibration"] = {{"draws", r.draws}, {"seed", r.seed}, {"stream", r.stream}};
  if (!r.regime.empty()) j["regime"] = r.regime;
  if (r.eigenvalues.size() || r.rank) {
    j["rank"] = r.rank;
    j["eigenvalues"] = to_json(r.eigenvalues);
  }
  if (r.sigma2) j["sigma2"] = {{"value", *r.sigma2}, {"source", r.sigma2_source}};
  if (!r.extra.empty()) {
    Json e;
    for (const auto& [k, v] : r.extra) e[k] = json_number(v);
    j["details"] = e;
  }
  j["warnings"] = r.warnings;
  return j;
}

inline Json to_json(const PowerTable& t) {
  Json j;
  j["scenario"] = t.scenario;
  j["seed"] = t.seed;
  j["replications"] = t.reps;
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"test", r.test}, {"rejections", r.rejections}, {"estimate", r.estimate}, {"se", r.se}});
  j["rows"] = rows;
  return j;
}

inline Json report_envelope(const std::string& command) {
  Json j;
  j["tool"] = "lofpc";
  j["version"] = kVersion;
  j["command"] = command;
  return j;
}

inline void write_power_tsv(std::ostream& out, const std::vector<PowerTable>& tables) {
  out << "scenario\ttest\treplications\trejections\testimate\tse\n";
  for (const auto& t : tables)
    for (const auto& r : t.rows)
      out << t.scenario << '\t' << r.test << '\t' << r.reps << '\t' << r.rejections << '\t'
          << format_double(r.estimate) << '\t' << format_double(r.se) << '\n';
}

}  // namespace lofpc
