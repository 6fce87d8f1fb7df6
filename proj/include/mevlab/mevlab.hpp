#pragma once

#include "mevlab/common_values.hpp"
#include "mevlab/distributions.hpp"
#include "mevlab/io.hpp"
#include "mevlab/numerics.hpp"
#include "mevlab/ode.hpp"
#include "mevlab/parallel.hpp"
#include "mevlab/private_equilibrium.hpp"
#include "mevlab/rng.hpp"
#include "mevlab/simulator.hpp"
#include "mevlab/special_functions.hpp"
