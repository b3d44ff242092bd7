#pragma once

#include "sle/autodiff.hpp"
#include "sle/checkpoint.hpp"
#include "sle/config.hpp"
#include "sle/cost.hpp"
#include "sle/data.hpp"
#include "sle/denoiser.hpp"
#include "sle/dense_array.hpp"
#include "sle/errors.hpp"
#include "sle/eval.hpp"
#include "sle/experiment.hpp"
#include "sle/kernels.hpp"
#include "sle/objectives.hpp"
#include "sle/optim.hpp"
#include "sle/parallel.hpp"
#include "sle/random.hpp"
#include "sle/sampler.hpp"
#include "sle/sphere.hpp"
#include "sle/tokenizer.hpp"
#include "sle/trainer.hpp"
