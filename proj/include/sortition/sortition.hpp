#pragma once
// Umbrella header.

#include "sortition/baseline.hpp"
#include "sortition/diagnostics.hpp"
#include "sortition/error.hpp"
#include "sortition/learning.hpp"
#include "sortition/marginals.hpp"
#include "sortition/numerics/matrix.hpp"
#include "sortition/numerics/nullspace.hpp"
#include "sortition/numerics/random.hpp"
#include "sortition/numerics/simplex.hpp"
#include "sortition/rounding/beck_fiala.hpp"
#include "sortition/rounding/column_generation.hpp"
#include "sortition/rounding/panel.hpp"
#include "sortition/schema.hpp"
#include "sortition/simulator.hpp"
#include "sortition/tolerances.hpp"
