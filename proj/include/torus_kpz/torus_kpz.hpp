#pragma once

#include "torus_kpz/clt.hpp"
#include "torus_kpz/config.hpp"
#include "torus_kpz/corrector.hpp"
#include "torus_kpz/ergodicity.hpp"
#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/heat_kernel.hpp"
#include "torus_kpz/io.hpp"
#include "torus_kpz/noise.hpp"
#include "torus_kpz/parallel.hpp"
#include "torus_kpz/polymer.hpp"
#include "torus_kpz/rng.hpp"
#include "torus_kpz/she.hpp"
#include "torus_kpz/stats.hpp"
