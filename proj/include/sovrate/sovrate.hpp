#pragma once

// Umbrella header.

#include "sovrate/cart.hpp"
#include "sovrate/core.hpp"
#include "sovrate/dataset.hpp"
#include "sovrate/evaluate.hpp"
#include "sovrate/explain.hpp"
#include "sovrate/mlp.hpp"
#include "sovrate/ordlogit.hpp"
#include "sovrate/rating.hpp"
#include "sovrate/schema.hpp"
#include "sovrate/synth.hpp"
#include "sovrate/tune.hpp"
