#pragma once

#include "predmarket/betting.hpp"
#include "predmarket/data.hpp"
#include "predmarket/demos.hpp"
#include "predmarket/error.hpp"
#include "predmarket/experiment.hpp"
#include "predmarket/forest.hpp"
#include "predmarket/market.hpp"
#include "predmarket/metrics.hpp"
#include "predmarket/parallel.hpp"
#include "predmarket/random.hpp"
#include "predmarket/serialization.hpp"
#include "predmarket/solver.hpp"
#include "predmarket/training.hpp"
#include "predmarket/types.hpp"
