#pragma once

// Umbrella header.

#include "hullreplay/core.hpp"
#include "hullreplay/datagen.hpp"
#include "hullreplay/harness.hpp"
#include "hullreplay/hull.hpp"
#include "hullreplay/metrics.hpp"
#include "hullreplay/model.hpp"
#include "hullreplay/policies.hpp"
