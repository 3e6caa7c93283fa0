#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lofpc/numerics.hpp"

namespace lofpc {

/// Outcome of one hypothesis test plus everything needed to rerun it.
struct TestReport {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  long draws = 0;  // Monte Carlo null draws or bootstrap replicates; 0 if analytic
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string regime;
  long rank = 0;
  Vector eigenvalues;
  std::optional<double> sigma2;
  std::string sigma2_source;
  std::optional<double> critical_value;
  std::vector<std::pair<std::string, double>> extra;
  std::vector<std::string> warnings;

  void decide() { reject = p_value <= alpha; }
};

}  // namespace lofpc
