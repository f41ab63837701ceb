#pragma once

#include "gsopt/core.hpp"
#include "gsopt/problems.hpp"
#include "gsopt/optimizers.hpp"
#include "gsopt/analysis.hpp"
#include "gsopt/harness.hpp"
#include "gsopt/svg.hpp"
#include "gsopt/verify.hpp"
