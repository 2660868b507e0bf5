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

#include <algorithm>
#include <optional>
#include <vector>

#include "auv/codec/model.hpp"
#include "auv/gan/losses.hpp"

namespace auv::codec {

/// Mel distance between the reconstruction with one decoder layer's attention
/// branch skipped and the unablated reconstruction. `layer` is 1-based.
inline double ablate_decoder_layer(const CodecModel& model, std::size_t layer, const AudioSegment& segment,
                                   const dsp::MelConfig& mel = {}) {
  const std::size_t layers = model.config().network.decoder_layers;
  if (layer < 1 || layer > layers) {
    throw ConfigError("ablation layer " + std::to_string(layer) + " outside [1, " + std::to_string(layers) + "]");
  }
  ag::NoGradGuard guard;
  const auto tokens = model.tokenize(segment);
  const ag::Var latents = model.quantizer().embed(tokens);
  const auto base = model.decode(latents, segment.size()).audio(segment.sample_rate);
  const auto ablated = model.decode(latents, segment.size(), {layer}).audio(segment.sample_rate);
  return gan::mel_loss(ablated, base, mel);
}

struct LayerScore {
  std::size_t layer = 0;
  double score = 0.0;
};

/// Scores for every decoder layer, most degrading first; ties keep layer order.
inline std::vector<LayerScore> rank_decoder_layers(const CodecModel& model, const AudioSegment& segment, const dsp::MelConfig& mel = {}) {
  std::vector<LayerScore> out;
  for (std::size_t l = 1; l <= model.config().network.decoder_layers; ++l) out.push_back({l, ablate_decoder_layer(model, l, segment, mel)});
  std::stable_sort(out.begin(), out.end(), [](const LayerScore& a, const LayerScore& b) { return a.score > b.score; });
  return out;
}

}  // namespace auv::codec
