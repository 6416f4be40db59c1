#pragma once

#include "mcdp/basis.hpp"
#include "mcdp/consistency.hpp"
#include "mcdp/errors.hpp"
#include "mcdp/geometry.hpp"
#include "mcdp/grid.hpp"
#include "mcdp/io.hpp"
#include "mcdp/metrics.hpp"
#include "mcdp/refine.hpp"
#include "mcdp/scene.hpp"
#include "mcdp/synth.hpp"
