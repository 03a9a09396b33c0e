#pragma once

#include "dscope/classifiers/model.hpp"
#include "dscope/classifiers/model_io.hpp"
#include "dscope/common.hpp"
#include "dscope/corpus.hpp"
#include "dscope/dates.hpp"
#include "dscope/embedding.hpp"
#include "dscope/eval/crossval.hpp"
#include "dscope/eval/metrics.hpp"
#include "dscope/eval/report.hpp"
#include "dscope/hyperopt/bayes_opt.hpp"
#include "dscope/store.hpp"
#include "dscope/surveillance/batch.hpp"
#include "dscope/surveillance/timeline.hpp"
#include "dscope/taxonomy.hpp"
