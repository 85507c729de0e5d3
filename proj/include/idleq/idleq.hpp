#pragma once

// Exact analysis and simulation of heterogeneous M/M/N/K/FCFS systems under
// idle-time-order-based routing policies.

#include "idleq/closed_form.hpp"
#include "idleq/config.hpp"
#include "idleq/distribution.hpp"
#include "idleq/generator.hpp"
#include "idleq/metrics.hpp"
#include "idleq/policy.hpp"
#include "idleq/simulator.hpp"
#include "idleq/solver.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"
#include "idleq/verify.hpp"
