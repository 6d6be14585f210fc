#pragma once

#include "metree/discrete.hpp"
#include "metree/errors.hpp"
#include "metree/expression.hpp"
#include "metree/graph.hpp"
#include "metree/measure.hpp"
#include "metree/profile.hpp"
#include "metree/quadrature.hpp"
#include "metree/scaling.hpp"
#include "metree/solver.hpp"
#include "metree/treemeasure.hpp"
