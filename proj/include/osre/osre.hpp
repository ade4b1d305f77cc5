#pragma once

#include "osre/attribution.hpp"
#include "osre/common.hpp"
#include "osre/corpus.hpp"
#include "osre/encoder.hpp"
#include "osre/evaluation.hpp"
#include "osre/experiment.hpp"
#include "osre/synthesis.hpp"
#include "osre/training.hpp"
