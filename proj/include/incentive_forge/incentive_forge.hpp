#pragma once

#include "cost.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "gradient.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "scalar.hpp"
