#pragma once

#include "torsim/errors.hpp"
#include "torsim/config.hpp"
#include "torsim/turbine_params.hpp"
#include "torsim/aero.hpp"
#include "torsim/plant.hpp"
#include "torsim/linear_model.hpp"
#include "torsim/wind.hpp"
#include "torsim/lidar.hpp"
#include "torsim/exosystem.hpp"
#include "torsim/riccati.hpp"
#include "torsim/regulator.hpp"
#include "torsim/controllers.hpp"
#include "torsim/sim.hpp"
#include "torsim/metrics.hpp"
#include "torsim/runner.hpp"
