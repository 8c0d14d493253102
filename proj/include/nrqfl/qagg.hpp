#pragma once

#include "nrqfl/qagg/aggregate.hpp"
#include "nrqfl/qagg/diagnostics.hpp"
#include "nrqfl/qagg/mitigation.hpp"
#include "nrqfl/qagg/plan.hpp"
