#pragma once

// Umbrella header.

#include "lofpc/baselines.hpp"
#include "lofpc/error.hpp"
#include "lofpc/graph.hpp"
#include "lofpc/io.hpp"
#include "lofpc/lof_fixed.hpp"
#include "lofpc/lof_large.hpp"
#include "lofpc/numerics.hpp"
#include "lofpc/parallel.hpp"
#include "lofpc/report.hpp"
#include "lofpc/rng.hpp"
#include "lofpc/seasons.hpp"
#include "lofpc/simulate.hpp"
#include "lofpc/version.hpp"
