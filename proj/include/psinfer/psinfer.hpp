#pragma once

// Umbrella header: propensity-score weighted treatment-effect estimation with
// sandwich and bootstrap variance estimators, confidence intervals, and the
// Monte Carlo benchmark harness.

#include "psinfer/analyze.hpp"
#include "psinfer/bootstrap.hpp"
#include "psinfer/ci.hpp"
#include "psinfer/dataset.hpp"
#include "psinfer/dgp.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/estimators.hpp"
#include "psinfer/glm.hpp"
#include "psinfer/harness.hpp"
#include "psinfer/math.hpp"
#include "psinfer/rng.hpp"
#include "psinfer/sandwich.hpp"
#include "psinfer/simulate.hpp"
