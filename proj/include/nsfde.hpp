#pragma once

#include "nsfde/assignment.hpp"
#include "nsfde/checks.hpp"
#include "nsfde/coefficients.hpp"
#include "nsfde/csv.hpp"
#include "nsfde/ensemble.hpp"
#include "nsfde/neutral_term.hpp"
#include "nsfde/noise.hpp"
#include "nsfde/order_monitor.hpp"
#include "nsfde/sampler.hpp"
#include "nsfde/segment.hpp"
#include "nsfde/segment_orders.hpp"
#include "nsfde/solver.hpp"
#include "nsfde/wasserstein.hpp"
#include "nsfde/config.hpp"
#include "nsfde/experiments.hpp"
