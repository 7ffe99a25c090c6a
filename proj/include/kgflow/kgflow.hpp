#pragma once

#include "kgflow/checkpoint.hpp"
#include "kgflow/clinical.hpp"
#include "kgflow/common.hpp"
#include "kgflow/config.hpp"
#include "kgflow/connectivity.hpp"
#include "kgflow/csv.hpp"
#include "kgflow/datagen.hpp"
#include "kgflow/evaluation.hpp"
#include "kgflow/experiment.hpp"
#include "kgflow/knowledge_graph.hpp"
#include "kgflow/model.hpp"
#include "kgflow/optimizer.hpp"
#include "kgflow/synthea.hpp"
#include "kgflow/training.hpp"
