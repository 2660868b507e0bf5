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

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auv/codec/model.hpp"
#include "auv/distill/teacher.hpp"
#include "auv/dsp/mel.hpp"
#include "auv/gan/losses.hpp"

namespace auv::train {

enum class TeacherSource { mock, precomputed };

struct DistillSettings {
  bool enabled = true;
  /// Speech, music and general-audio teacher, in that order.
  std::vector<distill::TeacherSpec> teachers = {
      {"speech-teacher", 32, "mock", 50.0}, {"music-teacher", 32, "mock", 50.0}, {"audio-teacher", 32, "mock", 50.0}};
  TeacherSource source = TeacherSource::mock;
  std::uint64_t teacher_seed = 1234;
  /// Detach the decoder tap so distillation only trains the learner heads.
  bool stop_gradient = false;
  /// Per-teacher loss weights, same order as `teachers`.
  std::vector<double> teacher_weights = {1.0, 1.0, 1.0};

  distill::TeacherRouting routing() const {
    if (teachers.size() != 3) throw ConfigError("distill.teachers must list exactly 3 teachers (speech, music, audio)");
    return {teachers[0], teachers[1], teachers[2]};
  }

  double weight_of(const std::string& teacher) const {
    for (std::size_t i = 0; i < teachers.size(); ++i)
      if (teachers[i].name == teacher) return teacher_weights.at(i);
    throw ConfigError("unknown teacher '" + teacher + "'");
  }

  void validate() const {
    (void)routing();
    if (teacher_weights.size() != teachers.size()) throw ConfigError("distill.teacher_weights must have one entry per teacher");
    for (double w : teacher_weights)
      if (!std::isfinite(w) || w < 0) throw ConfigError("distill.teacher_weights must be finite and non-negative");
  }
};

struct TrainConfig {
  double peak_lr = 1e-4;
  std::size_t warmup_updates = 5000;
  std::size_t cosine_updates = 500000;
  double final_lr = 1e-5;
  std::size_t batch_size = 128;
  double max_segment_sec = 12.0;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.8;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t total_steps = 1000000;
  std::size_t checkpoint_every = 10000;

  gan::LossWeights weights;
  gan::GanObjective objective = gan::GanObjective::least_squares;
  codec::CodecConfig codec;
  dsp::MelConfig mel;
  gan::DiscriminatorConfig discriminators;
  DistillSettings distill;

  /// Desk-scale settings used by the smoke run: K=256 nested codebook, hidden 128.
  static TrainConfig desk() {
    TrainConfig c;
    c.peak_lr = 3e-4;
    c.final_lr = 3e-5;
    c.warmup_updates = 100;
    c.cosine_updates = 1900;
    c.batch_size = 2;
    c.max_segment_sec = 0.5;
    c.ema_decay = 0.995;
    c.discriminators.channels = 4;
    c.total_steps = 2000;
    c.checkpoint_every = 500;
    c.codec.network = codec::NetworkConfig::desk();
    return c;
  }

  /// Full-scale settings: hidden 512, 16384-entry codebook, batch 128, 12 s crops.
  static TrainConfig full() {
    TrainConfig c;
    c.codec.network = codec::NetworkConfig::full();
    c.codec.codebook.size = 16384;
    c.codec.codebook.preset = vq::PartitionPreset::base16384;
    c.distill.teachers = {{"wavlm", 1024, "avg layers 13-24", 50.0},
                          {"muq", 1024, "avg layers 5-10", 50.0},
                          {"beats", 768, "avg all layers", 50.0}};
    c.distill.source = TeacherSource::precomputed;
    c.discriminators.channels = 32;
    return c;
  }

  void validate() const {
    if (!(peak_lr > 0) || !(final_lr >= 0) || final_lr > peak_lr) throw ConfigError("learning rates must satisfy 0 <= final_lr <= peak_lr, peak_lr > 0");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(max_segment_sec > 0)) throw ConfigError("max_segment_sec must be positive");
    if (!(ema_decay >= 0 && ema_decay <= 1)) throw ConfigError("ema_decay must lie in [0, 1]");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) throw ConfigError("adam betas must lie in [0, 1)");
    if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
    if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
    weights.validate();
    codec.validate();
    mel.validate(codec.sample_rate);
    discriminators.validate();
    distill.validate();
  }

  std::size_t max_segment_samples() const {
    return static_cast<std::size_t>(std::floor(max_segment_sec * static_cast<double>(codec.sample_rate)));
  }
};

// ---- JSON ------------------------------------------------------------------

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, _] : j.items())
    if (!names.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

}  // namespace detail

inline nlohmann::json stft_to_json(const dsp::StftConfig& s) {
  return {{"n_fft", s.n_fft},
          {"win_length", s.win_length},
          {"hop_length", s.hop_length},
          {"window", s.window == dsp::WindowType::hann ? "hann" : "rectangular"},
          {"center", s.center}};
}

inline dsp::StftConfig stft_from_json(const nlohmann::json& j, dsp::StftConfig s = {}) {
  detail::reject_unknown(j, {"n_fft", "win_length", "hop_length", "window", "center"}, "stft");
  detail::read_field(j, "n_fft", s.n_fft);
  detail::read_field(j, "win_length", s.win_length);
  detail::read_field(j, "hop_length", s.hop_length);
  detail::read_field(j, "center", s.center);
  if (j.contains("window")) {
    const auto w = j.at("window").get<std::string>();
    if (w == "hann") s.window = dsp::WindowType::hann;
    else if (w == "rectangular") s.window = dsp::WindowType::rectangular;
    else throw ConfigError("stft: unknown window '" + w + "'");
  }
  return s;
}

inline nlohmann::json network_to_json(const codec::NetworkConfig& n) {
  return {{"hidden_size", n.hidden_size},         {"ffn_multiplier", n.ffn_multiplier},
          {"encoder_layers", n.encoder_layers},   {"decoder_layers", n.decoder_layers},
          {"attention_heads", n.attention_heads}, {"conv_kernel", n.conv_kernel},
          {"distill_tap_layer", n.distill_tap_layer}};
}

inline codec::NetworkConfig network_from_json(const nlohmann::json& j, codec::NetworkConfig n = {}) {
  detail::reject_unknown(j,
                         {"hidden_size", "ffn_multiplier", "encoder_layers", "decoder_layers", "attention_heads", "conv_kernel",
                          "distill_tap_layer"},
                         "network");
  detail::read_field(j, "hidden_size", n.hidden_size);
  detail::read_field(j, "ffn_multiplier", n.ffn_multiplier);
  detail::read_field(j, "encoder_layers", n.encoder_layers);
  detail::read_field(j, "decoder_layers", n.decoder_layers);
  detail::read_field(j, "attention_heads", n.attention_heads);
  detail::read_field(j, "conv_kernel", n.conv_kernel);
  detail::read_field(j, "distill_tap_layer", n.distill_tap_layer);
  return n;
}

inline nlohmann::json codebook_to_json(const vq::CodebookConfig& c) {
  nlohmann::json j = {{"size", c.size},
                      {"code_dim", c.code_dim},
                      {"preset", std::string(vq::preset_name(c.preset))},
                      {"normalize_codes", c.normalize_codes},
                      {"commitment_beta", c.commitment_beta},
                      {"dead_code_reset", c.dead_code_reset},
                      {"dead_code_steps", c.dead_code_steps}};
  if (c.custom_table) j["partition"] = c.custom_table->to_json();
  return j;
}

inline vq::CodebookConfig codebook_from_json(const nlohmann::json& j, vq::CodebookConfig c = {}) {
  detail::reject_unknown(j,
                         {"size", "code_dim", "preset", "normalize_codes", "commitment_beta", "dead_code_reset", "dead_code_steps",
                          "partition"},
                         "codebook");
  detail::read_field(j, "size", c.size);
  detail::read_field(j, "code_dim", c.code_dim);
  if (j.contains("preset")) c.preset = vq::parse_preset(j.at("preset").get<std::string>());
  detail::read_field(j, "normalize_codes", c.normalize_codes);
  detail::read_field(j, "commitment_beta", c.commitment_beta);
  detail::read_field(j, "dead_code_reset", c.dead_code_reset);
  detail::read_field(j, "dead_code_steps", c.dead_code_steps);
  if (j.contains("partition")) c.custom_table = vq::PartitionTable::from_json(j.at("partition"));
  return c;
}

inline nlohmann::json codec_to_json(const codec::CodecConfig& c) {
  return {{"sample_rate", c.sample_rate},
          {"stft", stft_to_json(c.stft)},
          {"network", network_to_json(c.network)},
          {"codebook", codebook_to_json(c.codebook)},
          {"max_log_magnitude", c.max_log_magnitude}};
}

inline codec::CodecConfig codec_from_json(const nlohmann::json& j, codec::CodecConfig c = {}) {
  detail::reject_unknown(j, {"sample_rate", "stft", "network", "codebook", "max_log_magnitude"}, "codec");
  detail::read_field(j, "sample_rate", c.sample_rate);
  if (j.contains("stft")) c.stft = stft_from_json(j.at("stft"), c.stft);
  if (j.contains("network")) c.network = network_from_json(j.at("network"), c.network);
  if (j.contains("codebook")) c.codebook = codebook_from_json(j.at("codebook"), c.codebook);
  detail::read_field(j, "max_log_magnitude", c.max_log_magnitude);
  return c;
}

inline nlohmann::json mel_to_json(const dsp::MelConfig& m) {
  return {{"stft", stft_to_json(m.stft)}, {"n_mels", m.n_mels}, {"f_min", m.f_min}, {"f_max", m.f_max}, {"eps", m.eps}};
}

inline dsp::MelConfig mel_from_json(const nlohmann::json& j, dsp::MelConfig m = {}) {
  detail::reject_unknown(j, {"stft", "n_mels", "f_min", "f_max", "eps"}, "mel");
  if (j.contains("stft")) m.stft = stft_from_json(j.at("stft"), m.stft);
  detail::read_field(j, "n_mels", m.n_mels);
  detail::read_field(j, "f_min", m.f_min);
  detail::read_field(j, "f_max", m.f_max);
  detail::read_field(j, "eps", m.eps);
  return m;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json teachers = nlohmann::json::array();
  for (const auto& t : c.distill.teachers)
    teachers.push_back({{"name", t.name}, {"feature_dim", t.feature_dim}, {"layer_selection", t.layer_selection}, {"frame_rate", t.frame_rate}});
  return {
      {"peak_lr", c.peak_lr},
      {"warmup_updates", c.warmup_updates},
      {"cosine_updates", c.cosine_updates},
      {"final_lr", c.final_lr},
      {"batch_size", c.batch_size},
      {"max_segment_sec", c.max_segment_sec},
      {"ema_decay", c.ema_decay},
      {"seed", c.seed},
      {"optimizer", {{"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"eps", c.adam_eps}, {"weight_decay", c.weight_decay}}},
      {"total_steps", c.total_steps},
      {"checkpoint_every", c.checkpoint_every},
      {"loss_weights",
       {{"mel", c.weights.mel},
        {"adv", c.weights.adv},
        {"feat_match", c.weights.feat_match},
        {"quantizer", c.weights.quantizer},
        {"distill", c.weights.distill}}},
      {"gan_objective", std::string(gan::objective_name(c.objective))},
      {"codec", codec_to_json(c.codec)},
      {"mel", mel_to_json(c.mel)},
      {"discriminators",
       {{"periods", c.discriminators.periods}, {"fft_sizes", c.discriminators.fft_sizes}, {"channels", c.discriminators.channels}}},
      {"distill",
       {{"enabled", c.distill.enabled},
        {"teachers", teachers},
        {"source", c.distill.source == TeacherSource::mock ? "mock" : "precomputed"},
        {"teacher_seed", c.distill.teacher_seed},
        {"stop_gradient", c.distill.stop_gradient},
        {"teacher_weights", c.distill.teacher_weights}}},
  };
}

/// Reads a config on top of `base`; keys absent from `j` keep the base value.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = TrainConfig::desk()) {
  try {
    detail::reject_unknown(j,
                           {"preset", "peak_lr", "warmup_updates", "cosine_updates", "final_lr", "batch_size", "max_segment_sec",
                            "ema_decay", "seed", "optimizer", "total_steps", "checkpoint_every", "loss_weights", "gan_objective",
                            "codec", "mel", "discriminators", "distill"},
                           "config");
    if (j.contains("preset")) {
      const auto p = j.at("preset").get<std::string>();
      if (p == "desk") c = TrainConfig::desk();
      else if (p == "full") c = TrainConfig::full();
      else throw ConfigError("config: unknown preset '" + p + "'");
    }
    detail::read_field(j, "peak_lr", c.peak_lr);
    detail::read_field(j, "warmup_updates", c.warmup_updates);
    detail::read_field(j, "cosine_updates", c.cosine_updates);
    detail::read_field(j, "final_lr", c.final_lr);
    detail::read_field(j, "batch_size", c.batch_size);
    detail::read_field(j, "max_segment_sec", c.max_segment_sec);
    detail::read_field(j, "ema_decay", c.ema_decay);
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "total_steps", c.total_steps);
    detail::read_field(j, "checkpoint_every", c.checkpoint_every);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      detail::reject_unknown(o, {"beta1", "beta2", "eps", "weight_decay"}, "optimizer");
      detail::read_field(o, "beta1", c.adam_beta1);
      detail::read_field(o, "beta2", c.adam_beta2);
      detail::read_field(o, "eps", c.adam_eps);
      detail::read_field(o, "weight_decay", c.weight_decay);
    }
    if (j.contains("loss_weights")) {
      const auto& w = j.at("loss_weights");
      detail::reject_unknown(w, {"mel", "adv", "feat_match", "quantizer", "distill"}, "loss_weights");
      detail::read_field(w, "mel", c.weights.mel);
      detail::read_field(w, "adv", c.weights.adv);
      detail::read_field(w, "feat_match", c.weights.feat_match);
      detail::read_field(w, "quantizer", c.weights.quantizer);
      detail::read_field(w, "distill", c.weights.distill);
    }
    if (j.contains("gan_objective")) c.objective = gan::parse_objective(j.at("gan_objective").get<std::string>());
    if (j.contains("codec")) c.codec = codec_from_json(j.at("codec"), c.codec);
    if (j.contains("mel")) c.mel = mel_from_json(j.at("mel"), c.mel);
    if (j.contains("discriminators")) {
      const auto& d = j.at("discriminators");
      detail::reject_unknown(d, {"periods", "fft_sizes", "channels"}, "discriminators");
      detail::read_field(d, "periods", c.discriminators.periods);
      detail::read_field(d, "fft_sizes", c.discriminators.fft_sizes);
      detail::read_field(d, "channels", c.discriminators.channels);
    }
    if (j.contains("distill")) {
      const auto& d = j.at("distill");
      detail::reject_unknown(d, {"enabled", "teachers", "source", "teacher_seed", "stop_gradient", "teacher_weights"}, "distill");
      detail::read_field(d, "enabled", c.distill.enabled);
      detail::read_field(d, "teacher_seed", c.distill.teacher_seed);
      detail::read_field(d, "stop_gradient", c.distill.stop_gradient);
      detail::read_field(d, "teacher_weights", c.distill.teacher_weights);
      if (d.contains("source")) {
        const auto s = d.at("source").get<std::string>();
        if (s == "mock") c.distill.source = TeacherSource::mock;
        else if (s == "precomputed") c.distill.source = TeacherSource::precomputed;
        else throw ConfigError("distill: unknown teacher source '" + s + "'");
      }
      if (d.contains("teachers")) {
        c.distill.teachers.clear();
        for (const auto& t : d.at("teachers")) {
          detail::reject_unknown(t, {"name", "feature_dim", "layer_selection", "frame_rate"}, "distill.teachers");
          distill::TeacherSpec spec;
          spec.name = t.at("name").get<std::string>();
          spec.feature_dim = t.at("feature_dim").get<std::size_t>();
          detail::read_field(t, "layer_selection", spec.layer_selection);
          detail::read_field(t, "frame_rate", spec.frame_rate);
          c.distill.teachers.push_back(spec);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Loads a JSON config file. AUV_SEED, when set, overrides the seed.
inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  TrainConfig c = train_config_from_json(j);
  if (const char* env = std::getenv("AUV_SEED")) {
    try {
      c.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("AUV_SEED is not an unsigned integer: ") + env);
    }
  }
  return c;
}

}  // namespace auv::train
