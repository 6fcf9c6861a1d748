#pragma once

#include "latticeforge/assembly.hpp"
#include "latticeforge/builtin_tilesets.hpp"
#include "latticeforge/config.hpp"
#include "latticeforge/environment.hpp"
#include "latticeforge/error.hpp"
#include "latticeforge/lattice.hpp"
#include "latticeforge/policy.hpp"
#include "latticeforge/random.hpp"
#include "latticeforge/solver.hpp"
#include "latticeforge/tileset.hpp"
#include "latticeforge/trainer.hpp"
