#pragma once

#include "adcbo/adam_cbo.hpp"
#include "adcbo/ensemble.hpp"
#include "adcbo/errors.hpp"
#include "adcbo/harness.hpp"
#include "adcbo/market_data.hpp"
#include "adcbo/objectives.hpp"
#include "adcbo/ops.hpp"
#include "adcbo/parallel.hpp"
#include "adcbo/regret.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/simplex.hpp"
#include "adcbo/theory.hpp"
#include "adcbo/types.hpp"
