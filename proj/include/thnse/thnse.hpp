#pragma once

#include "thnse/error.hpp"
#include "thnse/quadrature.hpp"
#include "thnse/mesh.hpp"
#include "thnse/spaces.hpp"
#include "thnse/operators.hpp"
#include "thnse/projection.hpp"
#include "thnse/flows.hpp"
#include "thnse/stepper.hpp"
#include "thnse/parallel.hpp"
#include "thnse/diagnostics.hpp"
#include "thnse/snapshot_io.hpp"
#include "thnse/config.hpp"
#include "thnse/csv.hpp"
#include "thnse/experiments.hpp"
