#pragma once

// Umbrella header for the whole library.

#include "preftrade/backtest.hpp"
#include "preftrade/common.hpp"
#include "preftrade/config.hpp"
#include "preftrade/csv.hpp"
#include "preftrade/evaluation.hpp"
#include "preftrade/market_data.hpp"
#include "preftrade/mlp.hpp"
#include "preftrade/preference.hpp"
#include "preftrade/rewards.hpp"
#include "preftrade/training.hpp"
