#pragma once

#include "varcontrib/error.hpp"
#include "varcontrib/special_functions.hpp"
#include "varcontrib/linalg.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/parallel.hpp"
#include "varcontrib/scenario.hpp"
#include "varcontrib/kernel.hpp"
#include "varcontrib/moments.hpp"
#include "varcontrib/risk.hpp"
#include "varcontrib/experiment.hpp"
#include "varcontrib/config.hpp"
#include "varcontrib/report.hpp"
