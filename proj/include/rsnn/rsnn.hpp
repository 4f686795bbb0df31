#pragma once

#include "rsnn/errors.hpp"
#include "rsnn/integer.hpp"
#include "rsnn/spike_train.hpp"
#include "rsnn/model.hpp"
#include "rsnn/io.hpp"
#include "rsnn/parallel.hpp"
#include "rsnn/lif.hpp"
#include "rsnn/transform.hpp"
#include "rsnn/oracle.hpp"
#include "rsnn/encoding_metrics.hpp"
#include "rsnn/cost_model.hpp"
#include "rsnn/qat.hpp"
