#pragma once

#include "kkreg/density.hpp"
#include "kkreg/errors.hpp"
#include "kkreg/experiment.hpp"
#include "kkreg/io.hpp"
#include "kkreg/kernels.hpp"
#include "kkreg/parallel.hpp"
#include "kkreg/regressor.hpp"
#include "kkreg/rng.hpp"
#include "kkreg/selection.hpp"
#include "kkreg/synthetic.hpp"
#include "kkreg/theory.hpp"
