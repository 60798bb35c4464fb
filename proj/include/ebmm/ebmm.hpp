#pragma once

/// Umbrella header: the full solver, regularization, inversion, and io stack.

#include "ebmm/budyko.hpp"
#include "ebmm/checks.hpp"
#include "ebmm/errors.hpp"
#include "ebmm/grid.hpp"
#include "ebmm/inverse.hpp"
#include "ebmm/io.hpp"
#include "ebmm/memory.hpp"
#include "ebmm/physics.hpp"
#include "ebmm/presets.hpp"
#include "ebmm/stepper.hpp"
