// Copyright 2026 The snrmask Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "snrmask/dataset.hpp"
#include "snrmask/enhance.hpp"
#include "snrmask/evaluation.hpp"
#include "snrmask/features.hpp"
#include "snrmask/metrics.hpp"
#include "snrmask/model_io.hpp"
#include "snrmask/network.hpp"
#include "snrmask/noise_tracker.hpp"
#include "snrmask/speech_psd.hpp"
#include "snrmask/stft.hpp"
#include "snrmask/wav.hpp"
