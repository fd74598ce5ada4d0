#pragma once

#include "apmax/data_io.hpp"
#include "apmax/estimation.hpp"
#include "apmax/harness.hpp"
#include "apmax/metrics.hpp"
#include "apmax/numeric.hpp"
#include "apmax/objective.hpp"
#include "apmax/optimizers.hpp"
#include "apmax/oracles.hpp"
#include "apmax/rng.hpp"
#include "apmax/scoring.hpp"
