#pragma once

#include "mfg/core.hpp"
#include "mfg/cyber.hpp"
#include "mfg/env.hpp"
#include "mfg/exact.hpp"
#include "mfg/harness.hpp"
#include "mfg/policy.hpp"
#include "mfg/rl.hpp"
#include "mfg/rng.hpp"
