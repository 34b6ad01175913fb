#pragma once

#include "eswt/attention.hpp"
#include "eswt/config.hpp"
#include "eswt/gradcheck.hpp"
#include "eswt/image_io.hpp"
#include "eswt/layers.hpp"
#include "eswt/metrics.hpp"
#include "eswt/model.hpp"
#include "eswt/ops.hpp"
#include "eswt/profile.hpp"
#include "eswt/rng.hpp"
#include "eswt/tensor.hpp"
#include "eswt/training.hpp"
#include "eswt/windowing.hpp"
