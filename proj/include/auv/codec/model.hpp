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

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "auv/core/audio.hpp"
#include "auv/dsp/stft.hpp"
#include "auv/nn/conformer.hpp"
#include "auv/vq/quantizer.hpp"

namespace auv::codec {

struct NetworkConfig {
  std::size_t hidden_size = 128;
  std::size_t ffn_multiplier = 4;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 3;
  std::size_t attention_heads = 4;
  std::size_t conv_kernel = 31;
  std::size_t distill_tap_layer = 2;  ///< 1-based decoder layer feeding the distillation head

  /// hidden 128, 4 heads, 2 encoder / 3 decoder layers, tap on decoder layer 2.
  static NetworkConfig desk() { return {}; }
  /// hidden 512, 8 heads, 8 encoder / 12 decoder layers, tap on decoder layer 6.
  static NetworkConfig full() { return {512, 4, 8, 12, 8, 31, 6}; }

  void validate() const {
    if (hidden_size == 0 || attention_heads == 0 || hidden_size % attention_heads != 0)
      throw ConfigError("hidden_size must be a positive multiple of attention_heads");
    if (encoder_layers == 0 || decoder_layers == 0) throw ConfigError("encoder_layers and decoder_layers must be positive");
    if (distill_tap_layer < 1 || distill_tap_layer > decoder_layers)
      throw ConfigError("distill_tap_layer must lie in [1, decoder_layers]");
    if (conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
    if (ffn_multiplier == 0) throw ConfigError("ffn_multiplier must be positive");
  }

  nn::ConformerShape block_shape() const { return {hidden_size, ffn_multiplier, attention_heads, conv_kernel}; }

  bool operator==(const NetworkConfig&) const = default;
};

struct CodecConfig {
  int sample_rate = 16000;
  dsp::StftConfig stft;
  NetworkConfig network;
  vq::CodebookConfig codebook;
  /// Predicted log-magnitudes are clipped here before exponentiation.
  double max_log_magnitude = std::log(100.0);

  void validate() const {
    if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
    stft.validate();
    network.validate();
    codebook.validate();
  }

  double frame_rate() const { return static_cast<double>(sample_rate) / static_cast<double>(stft.hop_length); }
};

struct LatentSequence {
  ag::Var latents;  ///< [T, hidden]
  double frame_rate = 0.0;
  std::size_t original_length = 0;

  std::size_t frames() const { return latents.value().rows(); }
};

struct DecoderTrace {
  std::vector<ag::Var> layers;  ///< output of each decoder block, [T, hidden]
  ag::Var head_output;          ///< [T, 2 * bins]: log-magnitude then phase
  std::size_t tap_layer = 0;

  const ag::Var& tap() const { return layers.at(tap_layer - 1); }
};

struct DecoderOutput {
  ag::Var waveform;  ///< [length]
  DecoderTrace trace;

  AudioSegment audio(int sample_rate) const {
    AudioSegment a;
    a.sample_rate = sample_rate;
    a.samples = waveform.value().storage();
    return a;
  }
};

/// Encoder: STFT head -> linear projection -> conformer stack.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const CodecConfig& cfg, std::mt19937_64& rng) : stft_(cfg.stft), input_(2 * cfg.stft.bins(), cfg.network.hidden_size, rng) {
    for (std::size_t i = 0; i < cfg.network.encoder_layers; ++i) blocks_.emplace_back(cfg.network.block_shape(), rng);
  }

  ag::Var operator()(const ag::Var& wave) const {
    ag::Var h = input_(dsp::stft(wave, stft_));
    for (const auto& block : blocks_) h = block(h);
    return h;
  }

  void collect(nn::ParameterList& out, const std::string& prefix) const {
    input_.collect(out, prefix + ".input");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(out, prefix + ".block" + std::to_string(i + 1));
  }

 private:
  dsp::StftConfig stft_;
  nn::Linear input_;
  std::vector<nn::ConformerBlock> blocks_;
};

/// Decoder: conformer stack -> log-magnitude/phase head -> inverse STFT.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const CodecConfig& cfg, std::mt19937_64& rng)
      : stft_(cfg.stft), tap_layer_(cfg.network.distill_tap_layer), max_log_magnitude_(cfg.max_log_magnitude),
        hidden_(cfg.network.hidden_size) {
    for (std::size_t i = 0; i < cfg.network.decoder_layers; ++i) blocks_.emplace_back(cfg.network.block_shape(), rng);
    head_ = nn::Linear(cfg.network.hidden_size, 2 * cfg.stft.bins(), rng);
  }

  /// `ablated` holds 1-based layer indices whose attention branch is skipped.
  DecoderOutput operator()(const ag::Var& quantized, std::size_t length, const std::set<std::size_t>& ablated = {}) const {
    if (quantized.value().rank() != 2 || quantized.value().cols() != hidden_) {
      throw ShapeError("decode: expected (T, " + std::to_string(hidden_) + ") latents, got " + shape_string(quantized.shape()));
    }
    const std::size_t frames = quantized.value().rows();
    if (frames == 0) throw ConfigError("decode: no frames");
    if (length == 0) length = frames * stft_.hop_length;
    if (length > frames * stft_.hop_length) throw ConfigError("decode: requested length exceeds frames * hop");
    DecoderOutput out;
    out.trace.tap_layer = tap_layer_;
    ag::Var h = quantized;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      h = blocks_[i](h, !ablated.contains(i + 1));
      out.trace.layers.push_back(h);
    }
    const std::size_t bins = stft_.bins();
    out.trace.head_output = head_(h);
    const ag::Var magnitude = ag::exp(ag::clamp_max(ag::slice_cols(out.trace.head_output, 0, bins), max_log_magnitude_));
    const ag::Var phase = ag::slice_cols(out.trace.head_output, bins, bins);
    const ag::Var spectrum = ag::concat_cols({ag::mul(magnitude, ag::cos(phase)), ag::mul(magnitude, ag::sin(phase))});
    out.waveform = dsp::istft(spectrum, length, stft_);
    return out;
  }

  std::size_t layer_count() const { return blocks_.size(); }
  const nn::ConformerBlock& block(std::size_t i) const { return blocks_.at(i); }

  void collect(nn::ParameterList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(out, prefix + ".block" + std::to_string(i + 1));
    head_.collect(out, prefix + ".head");
  }

 private:
  dsp::StftConfig stft_;
  std::size_t tap_layer_ = 1;
  double max_log_magnitude_ = 0.0;
  std::size_t hidden_ = 0;
  std::vector<nn::ConformerBlock> blocks_;
  nn::Linear head_;
};

/// Encoder, nested-codebook quantiser and decoder with shared configuration.
class CodecModel {
 public:
  explicit CodecModel(CodecConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    table_ = cfg_.codebook.partition_table();
    std::mt19937_64 rng(seed);
    encoder_ = Encoder(cfg_, rng);
    quantizer_ = vq::FactorizedQuantizer(cfg_.network.hidden_size, cfg_.codebook, rng);
    decoder_ = Decoder(cfg_, rng);
  }
  CodecModel(const CodecModel&) = delete;
  CodecModel& operator=(const CodecModel&) = delete;
  CodecModel(CodecModel&&) = default;
  CodecModel& operator=(CodecModel&&) = default;

  const CodecConfig& config() const noexcept { return cfg_; }
  const vq::PartitionTable& partition_table() const noexcept { return table_; }
  vq::FactorizedQuantizer& quantizer() noexcept { return quantizer_; }
  const vq::FactorizedQuantizer& quantizer() const noexcept { return quantizer_; }
  const Decoder& decoder() const noexcept { return decoder_; }

  void check_audio(const AudioSegment& audio) const {
    if (audio.empty()) throw ConfigError("encode: empty audio");
    if (audio.sample_rate != cfg_.sample_rate) {
      throw ConfigError("sample rate " + std::to_string(audio.sample_rate) + " Hz does not match model rate " +
                        std::to_string(cfg_.sample_rate) + " Hz");
    }
  }

  static ag::Var waveform(const AudioSegment& audio) { return ag::Var(Tensor({audio.size()}, audio.samples)); }

  LatentSequence encode(const ag::Var& wave) const {
    if (wave.size() == 0) throw ConfigError("encode: empty audio");
    return {encoder_(wave), cfg_.frame_rate(), wave.size()};
  }
  LatentSequence encode(const AudioSegment& audio) const {
    check_audio(audio);
    return encode(waveform(audio));
  }

  vq::QuantizedSequence quantize(const LatentSequence& latents, std::optional<Domain> domain) const {
    return quantizer_.quantize(latents.latents, vq::domain_mask(table_, domain));
  }

  DecoderOutput decode(const ag::Var& quantized_latents, std::size_t length = 0, const std::set<std::size_t>& ablated = {}) const {
    return decoder_(quantized_latents, length, ablated);
  }
  DecoderOutput decode(const vq::QuantizedSequence& q, std::size_t length = 0) const {
    return decode(q.quantized_latents, length);
  }

  /// Token indices for a clip; no domain means the full codebook is searched.
  std::vector<std::uint32_t> tokenize(const AudioSegment& audio, std::optional<Domain> domain = std::nullopt) const {
    ag::NoGradGuard no_grad;
    return quantize(encode(audio), domain).indices;
  }

  AudioSegment detokenize(const std::vector<std::uint32_t>& tokens, std::size_t length) const {
    ag::NoGradGuard no_grad;
    if (tokens.empty()) throw ConfigError("decode: no tokens");
    return decode(quantizer_.embed(tokens), length).audio(cfg_.sample_rate);
  }

  AudioSegment reconstruct(const AudioSegment& audio, std::optional<Domain> domain = std::nullopt) const {
    return detokenize(tokenize(audio, domain), audio.size());
  }

  nn::ParameterList parameters() const {
    nn::ParameterList out;
    encoder_.collect(out, "encoder");
    quantizer_.collect(out, "quantizer");
    decoder_.collect(out, "decoder");
    return out;
  }
  nn::ParameterList encoder_parameters() const {
    nn::ParameterList out;
    encoder_.collect(out, "encoder");
    return out;
  }
  nn::ParameterList decoder_parameters() const {
    nn::ParameterList out;
    decoder_.collect(out, "decoder");
    return out;
  }

 private:
  CodecConfig cfg_;
  vq::PartitionTable table_ = vq::PartitionTable::desk256();
  Encoder encoder_;
  vq::FactorizedQuantizer quantizer_;
  Decoder decoder_;
};

}  // namespace auv::codec
