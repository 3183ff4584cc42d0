#pragma once

#include "hanes/errors.hpp"
#include "hanes/topology.hpp"
#include "hanes/dynamics.hpp"
#include "hanes/rng.hpp"
#include "hanes/hybrid.hpp"
#include "hanes/game_costs.hpp"
#include "hanes/nash_solver.hpp"
#include "hanes/scenarios.hpp"
#include "hanes/hanes_runtime.hpp"
#include "hanes/io.hpp"
#include "hanes/oracle.hpp"
