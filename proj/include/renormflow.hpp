#pragma once

#include "renormflow/chain.hpp"
#include "renormflow/chart.hpp"
#include "renormflow/config.hpp"
#include "renormflow/csv.hpp"
#include "renormflow/diffusion.hpp"
#include "renormflow/error.hpp"
#include "renormflow/grid.hpp"
#include "renormflow/lattice.hpp"
#include "renormflow/parallel.hpp"
#include "renormflow/renorm.hpp"
#include "renormflow/rng.hpp"
#include "renormflow/sde.hpp"
#include "renormflow/stats.hpp"
#include "renormflow/vec2.hpp"
