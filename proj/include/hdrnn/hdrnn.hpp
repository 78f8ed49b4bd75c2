#pragma once

// Umbrella header for the whole library.

#include "hdrnn/config.hpp"
#include "hdrnn/dataio.hpp"
#include "hdrnn/finite_diff.hpp"
#include "hdrnn/hierarchy.hpp"
#include "hdrnn/lstm.hpp"
#include "hdrnn/metrics.hpp"
#include "hdrnn/model.hpp"
#include "hdrnn/pipeline.hpp"
#include "hdrnn/plant.hpp"
#include "hdrnn/prbs.hpp"
#include "hdrnn/train.hpp"
#include "hdrnn/tune.hpp"
