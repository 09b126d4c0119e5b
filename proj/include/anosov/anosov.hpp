#pragma once

#include "anosov/analytic_charts.hpp"
#include "anosov/chart.hpp"
#include "anosov/cone.hpp"
#include "anosov/disk_lattice.hpp"
#include "anosov/embedding.hpp"
#include "anosov/errors.hpp"
#include "anosov/flow.hpp"
#include "anosov/mesh.hpp"
#include "anosov/model_space.hpp"
#include "anosov/tube_profile.hpp"
