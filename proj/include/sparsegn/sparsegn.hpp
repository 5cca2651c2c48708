// Convenience umbrella header.
#pragma once

#include "sparsegn/cd.hpp"
#include "sparsegn/config.hpp"
#include "sparsegn/experiment.hpp"
#include "sparsegn/metrics.hpp"
#include "sparsegn/problem.hpp"
#include "sparsegn/pruning.hpp"
#include "sparsegn/rng.hpp"
#include "sparsegn/solvers.hpp"
#include "sparsegn/synth.hpp"
