#pragma once

#include "mov/baselines.hpp"
#include "mov/checkpoint.hpp"
#include "mov/data.hpp"
#include "mov/dataset.hpp"
#include "mov/error.hpp"
#include "mov/eval.hpp"
#include "mov/gradcheck.hpp"
#include "mov/harness.hpp"
#include "mov/model.hpp"
#include "mov/nn.hpp"
#include "mov/seed.hpp"
#include "mov/train.hpp"
