#pragma once

#include "ohflux/cli.hpp"
#include "ohflux/diagnostics.hpp"
#include "ohflux/errors.hpp"
#include "ohflux/evolve.hpp"
#include "ohflux/experiments.hpp"
#include "ohflux/flux_model.hpp"
#include "ohflux/grid.hpp"
#include "ohflux/mesh_state.hpp"
#include "ohflux/nonlocal_source.hpp"
