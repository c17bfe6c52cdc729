#pragma once

#include "mlweaving/bitserial.hpp"
#include "mlweaving/cost_model.hpp"
#include "mlweaving/dataset_io.hpp"
#include "mlweaving/error.hpp"
#include "mlweaving/fixed.hpp"
#include "mlweaving/pipeline_sim.hpp"
#include "mlweaving/precision_scheduler.hpp"
#include "mlweaving/quantize.hpp"
#include "mlweaving/sgd_trainer.hpp"
#include "mlweaving/synthetic.hpp"
#include "mlweaving/weaving_io.hpp"
#include "mlweaving/weaving_store.hpp"
