// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rosetta/datagen.hpp"
#include "rosetta/error.hpp"
#include "rosetta/eval.hpp"
#include "rosetta/image.hpp"
#include "rosetta/metrics.hpp"
#include "rosetta/model/checkpoint.hpp"
#include "rosetta/model/config.hpp"
#include "rosetta/model/layers.hpp"
#include "rosetta/model/network.hpp"
#include "rosetta/model/params.hpp"
#include "rosetta/optim.hpp"
#include "rosetta/parallel.hpp"
#include "rosetta/random.hpp"
#include "rosetta/report.hpp"
#include "rosetta/tokenizer.hpp"
#include "rosetta/train.hpp"
#include "rosetta/truetype.hpp"
#include "rosetta/utf8.hpp"
