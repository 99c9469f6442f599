#pragma once

// Spatio-temporal kernel-warped density estimation for point-process demand.

#include "warpfield/common.hpp"
#include "warpfield/data.hpp"
#include "warpfield/geometry.hpp"
#include "warpfield/kernels.hpp"
#include "warpfield/grid.hpp"
#include "warpfield/density.hpp"
#include "warpfield/partition.hpp"
#include "warpfield/optimizer.hpp"
#include "warpfield/estimation.hpp"
#include "warpfield/baselines.hpp"
#include "warpfield/evaluation.hpp"
#include "warpfield/run.hpp"
