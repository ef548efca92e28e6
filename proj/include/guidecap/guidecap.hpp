#pragma once

// Umbrella header.

#include "guidecap/attributes.hpp"
#include "guidecap/commands.hpp"
#include "guidecap/corpus.hpp"
#include "guidecap/decode.hpp"
#include "guidecap/errors.hpp"
#include "guidecap/finite_diff.hpp"
#include "guidecap/formats.hpp"
#include "guidecap/guiding.hpp"
#include "guidecap/metrics.hpp"
#include "guidecap/model.hpp"
#include "guidecap/objective.hpp"
#include "guidecap/optim.hpp"
#include "guidecap/param_store.hpp"
#include "guidecap/review.hpp"
#include "guidecap/run_config.hpp"
#include "guidecap/synth.hpp"
#include "guidecap/tape.hpp"
#include "guidecap/tensor.hpp"
#include "guidecap/trainer.hpp"
