// Umbrella header.
#pragma once

#include "kpsign/augment.hpp"
#include "kpsign/checkpoint.hpp"
#include "kpsign/config_file.hpp"
#include "kpsign/dataset.hpp"
#include "kpsign/error.hpp"
#include "kpsign/eval.hpp"
#include "kpsign/kpsq.hpp"
#include "kpsign/layout.hpp"
#include "kpsign/model.hpp"
#include "kpsign/nn.hpp"
#include "kpsign/rng.hpp"
#include "kpsign/synth.hpp"
#include "kpsign/tensor.hpp"
#include "kpsign/train.hpp"
#include "kpsign/window.hpp"
