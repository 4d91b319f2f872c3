#pragma once

// Umbrella header.

#include "flsim/agents.hpp"
#include "flsim/checkpoint.hpp"
#include "flsim/config.hpp"
#include "flsim/constraints.hpp"
#include "flsim/convergence.hpp"
#include "flsim/ddpg.hpp"
#include "flsim/env.hpp"
#include "flsim/errors.hpp"
#include "flsim/harness.hpp"
#include "flsim/mathutil.hpp"
#include "flsim/metrics.hpp"
#include "flsim/mlp.hpp"
#include "flsim/policy.hpp"
#include "flsim/replay.hpp"
#include "flsim/rng.hpp"
#include "flsim/sac.hpp"
#include "flsim/wireless.hpp"
