#pragma once

#include "core.hpp"
#include "model.hpp"
#include "patterns.hpp"
#include "optimizer.hpp"
#include "training.hpp"
#include "io.hpp"
