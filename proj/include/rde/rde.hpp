#pragma once

// Demand estimation from censored sales transactions: conditional logit
// choice model, market-share-constrained no-purchase sizing, prediction,
// and synthetic-data tooling.

#include "rde/csv.hpp"
#include "rde/dataset.hpp"
#include "rde/errors.hpp"
#include "rde/estimation.hpp"
#include "rde/likelihood.hpp"
#include "rde/numeric.hpp"
#include "rde/prediction.hpp"
#include "rde/report.hpp"
#include "rde/reshape.hpp"
#include "rde/rng.hpp"
#include "rde/serialize.hpp"
#include "rde/synthetic.hpp"
