// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header. Headers that need nlohmann/json (serialize, data, config,
// covariance, report) are included as well; add the vendor directory to the
// include path.
#pragma once

#include "gdres/batchnorm.hpp"
#include "gdres/bessel.hpp"
#include "gdres/config.hpp"
#include "gdres/covariance.hpp"
#include "gdres/data.hpp"
#include "gdres/dataset.hpp"
#include "gdres/discrete_kernel.hpp"
#include "gdres/forward.hpp"
#include "gdres/jet.hpp"
#include "gdres/net_config.hpp"
#include "gdres/network.hpp"
#include "gdres/params.hpp"
#include "gdres/report.hpp"
#include "gdres/resample.hpp"
#include "gdres/rng.hpp"
#include "gdres/scalespace.hpp"
#include "gdres/selection.hpp"
#include "gdres/serialize.hpp"
#include "gdres/tensor_io.hpp"
#include "gdres/toy.hpp"
#include "gdres/train.hpp"
