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

// Command-line front end: train, encode, decode, eval, probe-codebook, ablate, spectrogram.
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "auv/auv.hpp"

namespace fs = std::filesystem;

namespace {

void emit_json(const nlohmann::json& j, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(output);
  if (!out) throw auv::IoError("cannot write " + output);
  out << j.dump(2) << '\n';
}

std::optional<auv::Domain> domain_option(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto d = auv::parse_domain(s);
  if (!d) throw auv::ConfigError("unknown domain '" + s + "' (expected speech, vocal, music or other)");
  return d;
}

std::vector<auv::AudioSegment> load_manifest_audio(const fs::path& manifest, bool downmix, std::vector<std::string>* names = nullptr) {
  std::vector<auv::AudioSegment> clips;
  for (const auto& e : auv::train::load_manifest(manifest)) {
    auto a = auv::dsp::load_wav(e.path, {.downmix = downmix});
    a.domain = e.domain;
    clips.push_back(std::move(a));
    if (names) names->push_back(e.path.string());
  }
  if (clips.empty()) throw auv::ConfigError("manifest " + manifest.string() + " has no entries");
  return clips;
}

int cmd_train(const std::string& config, const std::string& manifest, const std::string& out, const std::string& resume,
              std::optional<std::size_t> steps) {
  auto cfg = auv::train::load_train_config(config);
  if (steps) cfg.total_steps = *steps;
  const auto entries = auv::train::load_manifest(manifest);
  auv::train::Trainer trainer(cfg);
  auv::train::RunOptions opt;
  opt.out_dir = out;
  if (!resume.empty()) opt.resume = resume;
  opt.on_step = [](const auv::train::StepReport& r) {
    if (r.step % 50 == 0 || r.step == 1) {
      spdlog::info("step {} lr {:.3g} mel {:.4f} adv_g {:.4f} adv_d {:.4f} fm {:.4f} quant {:.4f} distill {:.4f}", r.step, r.lr,
                   r.losses.at("mel"), r.losses.at("adv_g"), r.losses.at("adv_d"), r.losses.at("fm"), r.losses.at("quant"),
                   r.losses.at("distill"));
    }
  };
  const auto final_step = auv::train::run_training(trainer, entries, opt);
  spdlog::info("finished at step {}; checkpoint {}", final_step, (fs::path(out) / "final.auvc").string());
  return 0;
}

int cmd_encode(const std::string& checkpoint, const std::string& input, const std::string& output, const std::string& domain,
               bool downmix) {
  const auto bundle = auv::train::load_inference_model(checkpoint);
  const auto audio = auv::dsp::load_wav(input, {.downmix = downmix});
  bundle.model.check_audio(audio);
  const auto& cfg = bundle.model.config();
  auv::bitstream::TokenStream s;
  s.sample_rate = static_cast<std::uint32_t>(cfg.sample_rate);
  s.hop = static_cast<std::uint16_t>(cfg.stft.hop_length);
  s.codebook_size = static_cast<std::uint32_t>(cfg.codebook.size);
  s.original_length = static_cast<std::uint32_t>(audio.size());
  s.tokens = bundle.model.tokenize(audio, domain_option(domain));
  auv::bitstream::write_stream(s, output);
  spdlog::info("{} tokens, {} bps", s.tokens.size(), auv::bitstream::bitrate(s));
  return 0;
}

int cmd_decode(const std::string& checkpoint, const std::string& input, const std::string& output) {
  const auto bundle = auv::train::load_inference_model(checkpoint);
  const auto s = auv::bitstream::read_stream(input);
  const auto& cfg = bundle.model.config();
  if (s.codebook_size != cfg.codebook.size) {
    throw auv::ConfigError("stream codebook size " + std::to_string(s.codebook_size) + " does not match checkpoint K=" +
                           std::to_string(cfg.codebook.size));
  }
  if (s.sample_rate != static_cast<std::uint32_t>(cfg.sample_rate) || s.hop != cfg.stft.hop_length)
    throw auv::ConfigError("stream sample rate or hop does not match the checkpoint");
  const auto audio = bundle.model.detokenize(s.tokens, s.original_length);
  auv::dsp::write_wav(audio, output);
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::vector<std::string>& inputs,
             const std::string& output, bool downmix) {
  const auto bundle = auv::train::load_inference_model(checkpoint);
  std::vector<std::string> names;
  std::vector<auv::AudioSegment> clips;
  if (!manifest.empty()) clips = load_manifest_audio(manifest, downmix, &names);
  for (const auto& in : inputs) {
    clips.push_back(auv::dsp::load_wav(in, {.downmix = downmix}));
    names.push_back(in);
  }
  if (clips.empty()) throw auv::ConfigError("eval: give --manifest or at least one --input");
  const auto& model = bundle.model;
  const auto& cfg = model.config();
  std::vector<auv::metrics::FileEval> files;
  std::vector<std::uint32_t> all_tokens;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    model.check_audio(clips[i]);
    const auto tokens = model.tokenize(clips[i]);
    const auto recon = model.detokenize(tokens, clips[i].size());
    auv::metrics::FileEval f;
    f.path = names[i];
    f.mel_distance = auv::gan::mel_loss(clips[i], recon, bundle.config.mel);
    f.si_snr = auv::metrics::si_snr(clips[i], recon);
    f.si_snr_capped = std::abs(f.si_snr) >= auv::metrics::kSiSnrCap;
    f.bitrate = auv::bitstream::bitrate(static_cast<std::uint32_t>(cfg.sample_rate), static_cast<std::uint32_t>(cfg.stft.hop_length),
                                        cfg.codebook.size);
    f.codes = auv::vq::codebook_stats(tokens, model.partition_table());
    all_tokens.insert(all_tokens.end(), tokens.begin(), tokens.end());
    files.push_back(std::move(f));
  }
  emit_json(auv::metrics::aggregate(std::move(files), all_tokens, model.partition_table()).to_json(), output);
  return 0;
}

int cmd_probe(const std::string& checkpoint, const std::string& manifest, const std::string& output, bool downmix) {
  const auto bundle = auv::train::load_inference_model(checkpoint);
  const auto clips = load_manifest_audio(manifest, downmix);
  emit_json(auv::metrics::probe_codebook(bundle.model, clips).to_json(), output);
  return 0;
}

int cmd_ablate(const std::string& checkpoint, const std::string& input, const std::string& output, bool downmix) {
  const auto bundle = auv::train::load_inference_model(checkpoint);
  const auto audio = auv::dsp::load_wav(input, {.downmix = downmix});
  bundle.model.check_audio(audio);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : auv::codec::rank_decoder_layers(bundle.model, audio, bundle.config.mel))
    rows.push_back({{"layer", s.layer}, {"mel_distance", s.score}});
  emit_json({{"input", input}, {"layers", rows}}, output);
  return 0;
}

int cmd_spectrogram(const std::string& input, const std::string& output, const std::string& format, bool downmix,
                    std::size_t n_fft, std::size_t hop) {
  const auto fmt = auv::metrics::parse_spectrogram_format(format);
  const auto audio = auv::dsp::load_wav(input, {.downmix = downmix});
  auv::dsp::StftConfig cfg;
  cfg.n_fft = n_fft;
  cfg.win_length = n_fft;
  cfg.hop_length = hop;
  cfg.validate();
  auv::metrics::write_spectrogram(auv::metrics::log_magnitude_spectrogram(audio, cfg), output, fmt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AUV neural audio codec"};
  app.require_subcommand(1);
  spdlog::set_pattern("%^%l%$: %v");

  std::string config, manifest, out = "runs/auv", resume, checkpoint, input, output, domain, format = "pgm";
  std::vector<std::string> inputs;
  std::optional<std::size_t> steps;
  std::size_t n_fft = 1024, hop = 320;
  bool downmix = false;

  auto* train = app.add_subcommand("train", "Train a codec from a JSON config and a JSON-lines manifest");
  train->add_option("--config", config, "Training config (JSON)")->required();
  train->add_option("--manifest", manifest, "Manifest (JSON lines: path, domain, duration_sec)")->required();
  train->add_option("--out", out, "Output directory for logs and checkpoints");
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_option("--steps", steps, "Override total_steps");

  auto* encode = app.add_subcommand("encode", "Encode a WAV file to an .auvt token stream");
  encode->add_option("--checkpoint", checkpoint)->required();
  encode->add_option("--input", input)->required();
  encode->add_option("--output", output)->required();
  encode->add_option("--domain", domain, "Restrict indices to one domain partition (experimentation only)");
  encode->add_flag("--downmix", downmix, "Average multichannel input to mono");

  auto* decode = app.add_subcommand("decode", "Decode an .auvt token stream to WAV");
  decode->add_option("--checkpoint", checkpoint)->required();
  decode->add_option("--input", input)->required();
  decode->add_option("--output", output)->required();

  auto* eval = app.add_subcommand("eval", "Reconstruction metrics over a manifest or files");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--manifest", manifest);
  eval->add_option("--input", inputs);
  eval->add_option("--output", output, "Report path (default stdout)");
  eval->add_flag("--downmix", downmix);

  auto* probe = app.add_subcommand("probe-codebook", "Index-distribution table per source domain");
  probe->add_option("--checkpoint", checkpoint)->required();
  probe->add_option("--manifest", manifest)->required();
  probe->add_option("--output", output, "Report path (default stdout)");
  probe->add_flag("--downmix", downmix);

  auto* ablate = app.add_subcommand("ablate", "Rank decoder layers by the damage done when their attention is skipped");
  ablate->add_option("--checkpoint", checkpoint)->required();
  ablate->add_option("--input", input)->required();
  ablate->add_option("--output", output, "Report path (default stdout)");
  ablate->add_flag("--downmix", downmix);

  auto* spec = app.add_subcommand("spectrogram", "Log-magnitude spectrogram as CSV or PGM");
  spec->add_option("--input", input)->required();
  spec->add_option("--output", output)->required();
  spec->add_option("--format", format, "csv or pgm");
  spec->add_option("--n-fft", n_fft);
  spec->add_option("--hop", hop);
  spec->add_flag("--downmix", downmix);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(config, manifest, out, resume, steps);
    if (*encode) return cmd_encode(checkpoint, input, output, domain, downmix);
    if (*decode) return cmd_decode(checkpoint, input, output);
    if (*eval) return cmd_eval(checkpoint, manifest, inputs, output, downmix);
    if (*probe) return cmd_probe(checkpoint, manifest, output, downmix);
    if (*ablate) return cmd_ablate(checkpoint, input, output, downmix);
    if (*spec) return cmd_spectrogram(input, output, format, downmix, n_fft, hop);
  } catch (const auv::ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
