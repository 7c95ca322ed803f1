#pragma once

#include "rtar/bench.hpp"
#include "rtar/blocks.hpp"
#include "rtar/errors.hpp"
#include "rtar/flops.hpp"
#include "rtar/kernels.hpp"
#include "rtar/model.hpp"
#include "rtar/pipeline.hpp"
#include "rtar/ppm.hpp"
#include "rtar/tensor.hpp"
#include "rtar/threading.hpp"
#include "rtar/weights.hpp"
