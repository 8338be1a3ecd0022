#pragma once

#include "wheatdet/augment.hpp"
#include "wheatdet/core.hpp"
#include "wheatdet/data.hpp"
#include "wheatdet/eval.hpp"
#include "wheatdet/fusion.hpp"
#include "wheatdet/orchestrate.hpp"
#include "wheatdet/parallel.hpp"
#include "wheatdet/protocol.hpp"
#include "wheatdet/raster.hpp"
#include "wheatdet/synthetic.hpp"
#include "wheatdet/transforms.hpp"
