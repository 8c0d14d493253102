#pragma once

#include "nrqfl/flsim/data.hpp"
#include "nrqfl/flsim/experiment.hpp"
#include "nrqfl/flsim/model.hpp"
