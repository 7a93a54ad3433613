// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pashape/adm.hpp"
#include "pashape/autodiff.hpp"
#include "pashape/bits.hpp"
#include "pashape/channel.hpp"
#include "pashape/config.hpp"
#include "pashape/constellation.hpp"
#include "pashape/csv.hpp"
#include "pashape/ess.hpp"
#include "pashape/experiment.hpp"
#include "pashape/fft.hpp"
#include "pashape/metrics.hpp"
#include "pashape/perturbation.hpp"
#include "pashape/rng.hpp"
#include "pashape/selection.hpp"
#include "pashape/selftest.hpp"
#include "pashape/source_model.hpp"
#include "pashape/training.hpp"
