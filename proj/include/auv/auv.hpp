/*
 * Copyright 2026 The AUV Codec Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "auv/bitstream/token_stream.hpp"
#include "auv/codec/ablation.hpp"
#include "auv/codec/model.hpp"
#include "auv/distill/loss.hpp"
#include "auv/distill/teacher.hpp"
#include "auv/dsp/mel.hpp"
#include "auv/dsp/stft.hpp"
#include "auv/dsp/wav.hpp"
#include "auv/gan/discriminators.hpp"
#include "auv/gan/losses.hpp"
#include "auv/metrics/metrics.hpp"
#include "auv/metrics/probe.hpp"
#include "auv/metrics/spectrogram.hpp"
#include "auv/train/loop.hpp"
#include "auv/vq/stats.hpp"
