// lofpc: lack-of-fit tests for cardinal pairwise comparison data.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

enum Exit { kOk = 0, kInput = 2, kProcedure = 3, kInternal = 4 };

void emit(const lofpc::Json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw lofpc::Error(lofpc::Errc::InvalidArgument, out + ": cannot write");
  f << text;
}

std::vector<double> parse_alphas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const double a = std::stod(tok, &used);
      if (used != tok.size() || !(a > 0 && a < 1)) throw std::invalid_argument(tok);
      out.push_back(a);
    } catch (const std::exception&) {
      throw lofpc::Error(lofpc::Errc::InvalidArgument, "bad alpha '" + tok + "'");
    }
  }
  if (out.empty()) throw lofpc::Error(lofpc::Errc::InvalidArgument, "no alpha levels");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace lofpc;
  CLI::App app{"Lack-of-fit tests for linear stochastic transitivity in pairwise comparison data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  int threads = 1;
  std::string out;
  std::optional<int> items;
  app.add_option("--threads", threads, "Worker threads (0 = all cores); never changes results")
      ->check(CLI::NonNegativeNumber);
  app.add_option("-o,--out", out, "Write the JSON report here instead of stdout");
  app.add_option("--items", items, "Number of items (default: largest id in the file)")->check(CLI::PositiveNumber);

  std::string file;
  cli::McFlags mc;
  auto add_mc = [&](CLI::App* c, bool with_seed) {
    c->add_option("--alpha", mc.alpha, "Test level")->check(CLI::Range(0.0, 1.0));
    if (with_seed) {
      c->add_option("--draws", mc.draws, "Monte Carlo null draws")->check(CLI::PositiveNumber);
      c->add_option("--seed", mc.seed, "Master seed (required)");
    }
    c->add_option("--sigma2", mc.sigma2, "Known error variance (overrides the estimate)")->check(CLI::PositiveNumber);
  };

  auto* fit = app.add_subcommand("fit", "Least-squares merits and graph summary");
  fit->add_option("file", file, "Comparisons CSV (i,j,y)")->required();

  auto* test = app.add_subcommand("test", "Run a lack-of-fit test");
  test->require_subcommand(1);

  std::string regime;
  auto* t_fixed = test->add_subcommand("fixed", "Residual test on a fixed graph, Monte Carlo calibrated");
  t_fixed->add_option("file", file)->required();
  t_fixed->add_option("--regime", regime, "all | threshold:T")->required();
  add_mc(t_fixed, true);

  cli::LargeFlags lf;
  auto* t_large = test->add_subcommand("large", "Growing-K test; localized when --candidates is given");
  t_large->add_option("file", file)->required();
  t_large->add_option("--candidates", lf.candidates, "Suspected cyclic items, e.g. 1,2,3,4,5,6");
  t_large->add_option("--bootstrap", lf.bootstrap, "Bootstrap replicates B")->check(CLI::PositiveNumber);
  t_large->add_flag("--closed-form", lf.closed_form, "Normal-theory variance instead of the bootstrap");
  t_large->add_option("--center", lf.center, "refit-u | full-graph");
  add_mc(t_large, true);

  auto* t_sparse = test->add_subcommand("sparse", "Localized bootstrap test on a sparse graph");
  t_sparse->add_option("file", file)->required();
  t_sparse->add_option("--candidates", lf.candidates, "Suspected cyclic items")->required();
  t_sparse->add_option("--bootstrap", lf.bootstrap, "Bootstrap replicates B")->check(CLI::PositiveNumber);
  t_sparse->add_option("--p", lf.p_k, "Edge probability (default: observed density)");
  t_sparse->add_option("--center", lf.center, "refit-u | full-graph");
  add_mc(t_sparse, true);

  bool cardinal = false;
  auto* t_ks = test->add_subcommand("ks", "Kendall-Smith cyclic triad count");
  t_ks->add_option("file", file)->required();
  t_ks->add_flag("--card", cardinal, "Cardinal cycle-sum variant");
  add_mc(t_ks, true);

  std::optional<std::string> f_candidates;
  auto* t_f = test->add_subcommand("f", "Regression F-test against candidate triads");
  t_f->add_option("file", file)->required();
  t_f->add_option("--candidates", f_candidates, "Triads, e.g. 1-2-3,1-2-4")->required();
  t_f->add_option("--alpha", mc.alpha)->check(CLI::Range(0.0, 1.0));

  std::optional<long> reps;
  std::optional<std::string> tsv;
  auto* sim = app.add_subcommand("simulate", "Power study from a scenario config");
  sim->add_option("config", file, "Scenario JSON")->required();
  sim->add_option("--reps", reps, "Override replications")->check(CLI::PositiveNumber);
  sim->add_option("--tsv", tsv, "Also write the power table as TSV");

  std::vector<std::string> season_inputs;
  cli::SeasonFlags sf;
  std::string alphas = "0.05,0.1";
  auto* seas = app.add_subcommand("seasons", "Cyclic teams, Jaccard, transitions and prediction");
  seas->add_option("inputs", season_inputs, "Directory of season CSVs or the files themselves")->required();
  seas->add_option("--alphas", alphas, "Levels for the prediction table");
  seas->add_option("--graphs", sf.graphs, "Resampled complete graphs per prediction")->check(CLI::PositiveNumber);
  seas->add_option("--bootstrap", sf.bootstrap, "Bootstrap replicates per graph")->check(CLI::PositiveNumber);
  seas->add_option("--draws", sf.draws, "Null draws for per-season tests")->check(CLI::PositiveNumber);
  seas->add_option("--seed", sf.seed, "Master seed (required)");
  seas->add_option("--tsv", tsv, "Also write the Jaccard matrix as TSV");

  auto* exp = app.add_subcommand("export", "Rewrite comparisons in canonical order");
  exp->add_option("file", file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    set_default_threads(threads);
    mc.threads = threads;
    sf.threads = threads;
    if (fit->parsed()) {
      emit(cli::cmd_fit(file, items), out);
    } else if (t_fixed->parsed()) {
      emit(cli::cmd_test_fixed(file, regime, mc, items), out);
    } else if (t_large->parsed()) {
      emit(cli::cmd_test_large(file, lf, mc, items), out);
    } else if (t_sparse->parsed()) {
      emit(cli::cmd_test_sparse(file, lf, mc, items), out);
    } else if (t_ks->parsed()) {
      emit(cli::cmd_test_ks(file, cardinal, mc, items), out);
    } else if (t_f->parsed()) {
      emit(cli::cmd_test_f(file, f_candidates, mc.alpha, items), out);
    } else if (sim->parsed()) {
      emit(cli::cmd_simulate(file, reps, threads, tsv), out);
    } else if (seas->parsed()) {
      sf.alphas = parse_alphas(alphas);
      emit(cli::cmd_seasons(season_inputs, sf, tsv), out);
    } else if (exp->parsed()) {
      if (out.empty() || out == "-") {
        cli::cmd_export(file, items, std::cout);
      } else {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw Error(Errc::InvalidArgument, out + ": cannot write");
        cli::cmd_export(file, items, f);
      }
    }
  } catch (const Error& e) {
    std::cerr << "lofpc: " << e.what() << "\n";
    return is_input_error(e.code()) ? kInput : kProcedure;
  } catch (const std::exception& e) {
    std::cerr << "lofpc: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
