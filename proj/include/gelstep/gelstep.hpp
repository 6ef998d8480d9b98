#pragma once

#include "gelstep/boundary.hpp"
#include "gelstep/config.hpp"
#include "gelstep/energy.hpp"
#include "gelstep/errors.hpp"
#include "gelstep/fields.hpp"
#include "gelstep/grid.hpp"
#include "gelstep/hminus.hpp"
#include "gelstep/io.hpp"
#include "gelstep/log.hpp"
#include "gelstep/parallel.hpp"
#include "gelstep/potentials.hpp"
#include "gelstep/run.hpp"
#include "gelstep/selftest.hpp"
#include "gelstep/solver.hpp"
#include "gelstep/spectral.hpp"
#include "gelstep/tensor.hpp"
#include "gelstep/verification.hpp"
