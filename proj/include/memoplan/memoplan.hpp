#pragma once

#include "memoplan/error.hpp"
#include "memoplan/graph_ir.hpp"
#include "memoplan/plan.hpp"
#include "memoplan/plan_check.hpp"
#include "memoplan/plan_io.hpp"
#include "memoplan/planner.hpp"
#include "memoplan/tagging.hpp"
#include "memoplan/trace.hpp"
#include "memoplan/trace_io.hpp"
