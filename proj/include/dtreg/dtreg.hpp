#ifndef DTREG_DTREG_HPP
#define DTREG_DTREG_HPP

#include "dtreg/core.hpp"
#include "dtreg/edt.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/io.hpp"
#include "dtreg/metrics.hpp"
#include "dtreg/objective.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/pipeline.hpp"
#include "dtreg/rng.hpp"
#include "dtreg/solver.hpp"
#include "dtreg/synth.hpp"
#include "dtreg/transform.hpp"
#include "dtreg/volume.hpp"

#endif
