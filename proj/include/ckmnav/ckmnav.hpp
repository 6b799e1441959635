#pragma once

#include "ckmnav/bounds.hpp"
#include "ckmnav/ckm.hpp"
#include "ckmnav/env.hpp"
#include "ckmnav/errors.hpp"
#include "ckmnav/geom.hpp"
#include "ckmnav/grid.hpp"
#include "ckmnav/io.hpp"
#include "ckmnav/kriging.hpp"
#include "ckmnav/linalg.hpp"
#include "ckmnav/parallel.hpp"
#include "ckmnav/random.hpp"
#include "ckmnav/sim.hpp"
#include "ckmnav/spp.hpp"
#include "ckmnav/tsp.hpp"
#include "ckmnav/vec3.hpp"
