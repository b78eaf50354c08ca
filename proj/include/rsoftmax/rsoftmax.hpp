#pragma once

#include "rsoftmax/attention.hpp"
#include "rsoftmax/checkpoint.hpp"
#include "rsoftmax/data.hpp"
#include "rsoftmax/error.hpp"
#include "rsoftmax/experiment.hpp"
#include "rsoftmax/linalg.hpp"
#include "rsoftmax/losses.hpp"
#include "rsoftmax/metrics.hpp"
#include "rsoftmax/nn.hpp"
#include "rsoftmax/probmap.hpp"
#include "rsoftmax/sweep.hpp"
#include "rsoftmax/toy_task.hpp"
