#pragma once

#include "paraopt/cli_app.hpp"
#include "paraopt/coefficient.hpp"
#include "paraopt/config.hpp"
#include "paraopt/control_space.hpp"
#include "paraopt/homogenize.hpp"
#include "paraopt/mesh.hpp"
#include "paraopt/optimal_control.hpp"
#include "paraopt/periodic_coefficient.hpp"
#include "paraopt/presets.hpp"
#include "paraopt/solution_io.hpp"
#include "paraopt/spectral_operator.hpp"
#include "paraopt/sweep.hpp"
#include "paraopt/time_grid.hpp"
#include "paraopt/version.hpp"
