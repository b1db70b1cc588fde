#pragma once

#include "anomet/benchmark.hpp"
#include "anomet/config.hpp"
#include "anomet/distance.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/eval.hpp"
#include "anomet/fewshot.hpp"
#include "anomet/gradcheck.hpp"
#include "anomet/hash.hpp"
#include "anomet/io.hpp"
#include "anomet/losses.hpp"
#include "anomet/mining.hpp"
#include "anomet/optimizer.hpp"
#include "anomet/protocol.hpp"
#include "anomet/rng.hpp"
#include "anomet/trainer.hpp"
#include "anomet/types.hpp"
#include "anomet/version.hpp"
