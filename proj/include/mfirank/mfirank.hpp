#pragma once

#include "mfirank/config.hpp"
#include "mfirank/csv.hpp"
#include "mfirank/dataset.hpp"
#include "mfirank/duration.hpp"
#include "mfirank/error.hpp"
#include "mfirank/eval.hpp"
#include "mfirank/feature_set.hpp"
#include "mfirank/features.hpp"
#include "mfirank/fixture.hpp"
#include "mfirank/io.hpp"
#include "mfirank/matrix.hpp"
#include "mfirank/rank.hpp"
#include "mfirank/records.hpp"
#include "mfirank/report.hpp"
#include "mfirank/schema.hpp"
#include "mfirank/stats.hpp"
#include "mfirank/time.hpp"
