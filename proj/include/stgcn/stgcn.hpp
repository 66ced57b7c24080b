#pragma once

// Umbrella header for the skeleton-based action recognition library.

#include "stgcn/common.hpp"
#include "stgcn/curriculum.hpp"
#include "stgcn/dataset_io.hpp"
#include "stgcn/features.hpp"
#include "stgcn/model.hpp"
#include "stgcn/nn.hpp"
#include "stgcn/preprocess.hpp"
#include "stgcn/skeleton.hpp"
#include "stgcn/synth.hpp"
#include "stgcn/tensor.hpp"
#include "stgcn/train.hpp"
#include "stgcn/transfer.hpp"
