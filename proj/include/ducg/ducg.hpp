#pragma once

#include "ducg/errors.hpp"
#include "ducg/event_algebra.hpp"
#include "ducg/exact.hpp"
#include "ducg/generators.hpp"
#include "ducg/graph.hpp"
#include "ducg/graph_io.hpp"
#include "ducg/recursive.hpp"
#include "ducg/sampling.hpp"
