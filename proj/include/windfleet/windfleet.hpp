#pragma once

#include "windfleet/artifacts.hpp"
#include "windfleet/autosplit.hpp"
#include "windfleet/common.hpp"
#include "windfleet/data.hpp"
#include "windfleet/eval.hpp"
#include "windfleet/features.hpp"
#include "windfleet/fedkmeans.hpp"
#include "windfleet/forecast.hpp"
#include "windfleet/io.hpp"
#include "windfleet/lstm.hpp"
#include "windfleet/metrics.hpp"
#include "windfleet/pipeline.hpp"
