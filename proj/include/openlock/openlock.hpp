#pragma once

#include "openlock/env.hpp"
#include "openlock/graph.hpp"
#include "openlock/harness.hpp"
#include "openlock/hypothesis.hpp"
#include "openlock/instance_learner.hpp"
#include "openlock/json_io.hpp"
#include "openlock/oracle.hpp"
#include "openlock/planner.hpp"
#include "openlock/stats.hpp"
#include "openlock/structure_learner.hpp"
