#pragma once

#include "sensilab/exact_point.hpp"
#include "sensilab/random.hpp"
#include "sensilab/map_spec.hpp"
#include "sensilab/metrics.hpp"
#include "sensilab/sensitivity.hpp"
#include "sensilab/classify.hpp"
#include "sensilab/report_io.hpp"
