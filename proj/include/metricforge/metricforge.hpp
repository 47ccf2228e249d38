#pragma once

#include "metricforge/aggregator.hpp"
#include "metricforge/baseline_metrics.hpp"
#include "metricforge/core.hpp"
#include "metricforge/correlation.hpp"
#include "metricforge/error.hpp"
#include "metricforge/extractor.hpp"
#include "metricforge/feature_store.hpp"
#include "metricforge/ingestion.hpp"
#include "metricforge/model_io.hpp"
#include "metricforge/pipeline.hpp"
#include "metricforge/stub_extractor.hpp"
#include "metricforge/text.hpp"
