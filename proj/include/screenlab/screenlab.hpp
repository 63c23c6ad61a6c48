#pragma once

#include "screenlab/config.hpp"
#include "screenlab/dist.hpp"
#include "screenlab/history.hpp"
#include "screenlab/mechanism.hpp"
#include "screenlab/numeric.hpp"
#include "screenlab/profile.hpp"
#include "screenlab/serialize.hpp"
#include "screenlab/sim.hpp"
#include "screenlab/solver.hpp"
#include "screenlab/stochastic.hpp"
