#pragma once

#include "qdot/correlate.hpp"
#include "qdot/errors.hpp"
#include "qdot/fit.hpp"
#include "qdot/io.hpp"
#include "qdot/irf.hpp"
#include "qdot/ladder.hpp"
#include "qdot/matrix.hpp"
#include "qdot/record.hpp"
#include "qdot/sim.hpp"
