#pragma once

#include "dqhe/dataset.hpp"
#include "dqhe/engine.hpp"
#include "dqhe/error.hpp"
#include "dqhe/fcs.hpp"
#include "dqhe/network.hpp"
#include "dqhe/parallel.hpp"
#include "dqhe/rng.hpp"
#include "dqhe/spectral.hpp"
#include "dqhe/train.hpp"
#include "dqhe/verify.hpp"
