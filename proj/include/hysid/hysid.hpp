#pragma once

#include "hysid/error.hpp"
#include "hysid/dataset.hpp"
#include "hysid/csv.hpp"
#include "hysid/hysteron.hpp"
#include "hysid/embedding.hpp"
#include "hysid/library.hpp"
#include "hysid/regression.hpp"
#include "hysid/model.hpp"
#include "hysid/tanksim.hpp"
#include "hysid/metrics.hpp"
#include "hysid/config.hpp"
#include "hysid/pipeline.hpp"
