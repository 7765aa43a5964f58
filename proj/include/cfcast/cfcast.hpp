#pragma once

// Umbrella header for the counterfactual forecasting toolkit.

#include "cfcast/commands.hpp"
#include "cfcast/config.hpp"
#include "cfcast/counterfactual.hpp"
#include "cfcast/csv.hpp"
#include "cfcast/date.hpp"
#include "cfcast/difference.hpp"
#include "cfcast/errors.hpp"
#include "cfcast/gbt.hpp"
#include "cfcast/lstm.hpp"
#include "cfcast/nelder_mead.hpp"
#include "cfcast/sarima.hpp"
#include "cfcast/series.hpp"
#include "cfcast/stats.hpp"
#include "cfcast/svg.hpp"
