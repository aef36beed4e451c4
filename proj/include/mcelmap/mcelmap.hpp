#pragma once

#include "mcelmap/autotune.hpp"
#include "mcelmap/clustering.hpp"
#include "mcelmap/coordinates.hpp"
#include "mcelmap/dataset.hpp"
#include "mcelmap/em.hpp"
#include "mcelmap/errors.hpp"
#include "mcelmap/io.hpp"
#include "mcelmap/metrics.hpp"
#include "mcelmap/solver.hpp"
#include "mcelmap/trajectory.hpp"
