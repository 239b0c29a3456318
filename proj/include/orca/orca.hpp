#pragma once

#include "orca/errors.hpp"
#include "orca/stats.hpp"
#include "orca/rng.hpp"
#include "orca/parallel.hpp"
#include "orca/hash.hpp"
#include "orca/market_data.hpp"
#include "orca/correlation.hpp"
#include "orca/jacobi.hpp"
#include "orca/spectral.hpp"
#include "orca/traditional.hpp"
#include "orca/labeling.hpp"
#include "orca/features.hpp"
#include "orca/scaler.hpp"
#include "orca/forest.hpp"
#include "orca/metrics.hpp"
#include "orca/walk_forward.hpp"
#include "orca/strategy.hpp"
#include "orca/synthetic.hpp"
#include "orca/config.hpp"
