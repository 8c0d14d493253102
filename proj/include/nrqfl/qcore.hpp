#pragma once

#include "nrqfl/qcore/channels.hpp"
#include "nrqfl/qcore/complex_matrix.hpp"
#include "nrqfl/qcore/eigen.hpp"
#include "nrqfl/qcore/measurement.hpp"
#include "nrqfl/qcore/state.hpp"
