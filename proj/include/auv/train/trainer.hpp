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
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auv/codec/model.hpp"
#include "auv/core/memory.hpp"
#include "auv/distill/loss.hpp"
#include "auv/distill/teacher.hpp"
#include "auv/gan/losses.hpp"
#include "auv/train/checkpoint.hpp"
#include "auv/train/config.hpp"
#include "auv/train/data.hpp"
#include "auv/train/optim.hpp"

namespace auv::train {

class NonFiniteLossError : public Error {
 public:
  using Error::Error;
};

struct StepReport {
  std::size_t step = 0;  ///< 1-based index of the update just taken
  double lr = 0.0;
  std::map<std::string, double> losses;  ///< mel, adv_g, adv_d, fm, quant, distill
  std::array<std::size_t, 3> bin_counts{};
  std::size_t emitted = 0;
  std::size_t violations = 0;  ///< emitted indices outside the item's domain range
  std::vector<Domain> item_domains;
  std::vector<std::vector<std::uint32_t>> item_indices;

  nlohmann::json to_json(bool with_indices = false) const {
    nlohmann::json j = {{"step", step}, {"lr", lr}, {"losses", losses}, {"violations", violations}, {"emitted", emitted}};
    nlohmann::json bins;
    for (std::size_t b = 0; b < 3; ++b) bins[std::string(vq::kReportBinNames[b])] = bin_counts[b];
    j["bin_counts"] = bins;
    if (with_indices) {
      nlohmann::json items = nlohmann::json::array();
      for (std::size_t i = 0; i < item_indices.size(); ++i)
        items.push_back({{"domain", std::string(domain_name(item_domains[i]))}, {"indices", item_indices[i]}});
      j["items"] = items;
    }
    return j;
  }
};

/// Teacher targets for batch items: mock teachers computed on the fly, or
/// precomputed .auvf files next to each clip.
class TeacherBank {
 public:
  explicit TeacherBank(const TrainConfig& cfg) : source_(cfg.distill.source), hop_(cfg.codec.stft.hop_length) {
    dsp::MelConfig mel = cfg.mel;
    mel.stft = cfg.codec.stft;
    for (std::size_t i = 0; i < cfg.distill.teachers.size(); ++i)
      mocks_.emplace(cfg.distill.teachers[i].name, distill::MockTeacher(cfg.distill.teachers[i], cfg.distill.teacher_seed + i, mel));
  }

  /// [frames, D] targets for one item.
  Tensor targets(const BatchItem& item, const distill::TeacherSpec& teacher, std::size_t frames) {
    if (source_ == TeacherSource::mock) return distill::align_frames(mocks_.at(teacher.name).features(item.audio), frames);
    const auto path = distill::teacher_feature_path(item.source, teacher.name);
    auto it = cache_.find(path.string());
    if (it == cache_.end()) it = cache_.emplace(path.string(), distill::read_teacher_features(path)).first;
    if (it->second.cols() != teacher.feature_dim) {
      throw ConfigError(path.string() + ": feature dim " + std::to_string(it->second.cols()) + ", teacher '" + teacher.name +
                        "' expects " + std::to_string(teacher.feature_dim));
    }
    const std::size_t full = std::max<std::size_t>(1, (std::max(item.source_length, item.audio.size()) + hop_ - 1) / hop_);
    const Tensor aligned = distill::align_frames(it->second, full);
    Tensor out = Tensor::matrix(frames, aligned.cols());
    const std::size_t first = item.offset / hop_;
    for (std::size_t t = 0; t < frames; ++t) {
      const auto row = aligned.row(std::min(first + t, full - 1));
      std::copy(row.begin(), row.end(), out.row(t).begin());
    }
    return out;
  }

 private:
  TeacherSource source_;
  std::size_t hop_;
  std::map<std::string, distill::MockTeacher> mocks_;
  std::map<std::string, Tensor> cache_;
};

/// Generator (codec + learner heads), discriminators, both optimizers and the
/// EMA shadow, advanced one adversarial step at a time.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_((cfg.validate(), std::move(cfg))),
        model_(cfg_.codec, cfg_.seed),
        bank_(cfg_.discriminators, cfg_.seed + 1),
        teachers_(cfg_),
        data_rng_(cfg_.seed + 3) {
    retain_freed_memory();
    std::mt19937_64 head_rng(cfg_.seed + 2);
    const auto specs = cfg_.distill.routing().teachers();
    heads_ = distill::LearnerHeads(cfg_.codec.network.hidden_size, {specs.begin(), specs.end()}, head_rng);
    const AdamW::Options opt{cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps, cfg_.weight_decay};
    gen_opt_ = AdamW(generator_parameters(), opt);
    disc_opt_ = AdamW(bank_.parameters(), opt);
    ema_ = EmaState::from(model_.parameters(), cfg_.ema_decay);
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  std::size_t step_count() const noexcept { return step_; }
  const codec::CodecModel& model() const noexcept { return model_; }
  codec::CodecModel& model() noexcept { return model_; }
  const gan::DiscriminatorBank& discriminators() const noexcept { return bank_; }
  const distill::LearnerHeads& heads() const noexcept { return heads_; }
  const EmaState& ema() const noexcept { return ema_; }
  std::mt19937_64& data_rng() noexcept { return data_rng_; }

  nn::ParameterList generator_parameters() const {
    nn::ParameterList p = model_.parameters();
    heads_.collect(p, "heads");
    return p;
  }

  /// Fresh model carrying the EMA weights, for inference.
  codec::CodecModel ema_model() const {
    codec::CodecModel m(cfg_.codec, cfg_.seed);
    ema_.copy_to(m.parameters());
    return m;
  }

  StepReport step(const std::vector<BatchItem>& batch) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    StepReport report;
    report.step = step_ + 1;
    report.lr = lr_schedule(report.step, cfg_);
    const auto& table = model_.partition_table();
    const auto routing = cfg_.distill.routing();

    // Generator forward, shared by both updates.
    std::vector<ag::Var> real(batch.size()), fake(batch.size());
    std::vector<ag::Var> mel_terms, quant_terms, distill_terms;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& item = batch[b];
      model_.check_audio(item.audio);
      real[b] = codec::CodecModel::waveform(item.audio);
      const auto latents = model_.encode(real[b]);
      const auto q = model_.quantize(latents, item.domain);
      const auto out = model_.decode(q.quantized_latents, item.audio.size());
      fake[b] = out.waveform;

      const auto range = table.range(item.domain);
      for (auto idx : q.indices) {
        ++report.bin_counts[static_cast<std::size_t>(table.bin_of(idx))];
        if (!range.contains(idx)) ++report.violations;
      }
      report.emitted += q.indices.size();
      report.item_domains.push_back(item.domain);
      report.item_indices.push_back(q.indices);
      if (cfg_.codec.codebook.dead_code_reset) {
        model_.quantizer().record_usage(q.indices, report.step);
        recent_queries_ = q.latents_lowdim.value();
      }

      mel_terms.push_back(gan::mel_loss(real[b], fake[b], cfg_.mel, cfg_.codec.sample_rate));
      quant_terms.push_back(model_.quantizer().loss(q));
      distill_terms.push_back(distill_term(item, out.trace, routing));
    }

    // Discriminator update on detached generator output, one item at a time
    // so that only one item's discriminator graph is alive. With both
    // adversarial weights at zero the discriminators are left untouched.
    const auto& w = cfg_.weights;
    const bool adversarial = w.adv > 0 || w.feat_match > 0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    disc_opt_.zero_grad();
    double adv_d = 0.0;
    for (std::size_t b = 0; adversarial && b < batch.size(); ++b) {
      const ag::Var term = gan::discriminator_loss(bank_(real[b]), bank_(ag::detach(fake[b])), cfg_.objective);
      adv_d += checked(term.item(), "adv_d", report.step) * inv_batch;
      ag::backward(ag::scale(term, inv_batch));
    }
    report.losses["adv_d"] = adv_d;
    if (adversarial) disc_opt_.step(report.lr);

    // Generator update against the refreshed discriminators. The adversarial
    // and feature-matching gradients are taken per item at the waveform and
    // injected into the generator graph together with the other terms.
    struct FreezeDiscriminators {
      Trainer& t;
      explicit FreezeDiscriminators(Trainer& tr) : t(tr) { t.set_discriminator_grad(false); }
      ~FreezeDiscriminators() { t.set_discriminator_grad(true); }
    };
    std::optional<FreezeDiscriminators> frozen(std::in_place, *this);
    double adv_g = 0.0, fm = 0.0;
    std::vector<ag::Var> total_terms;
    std::vector<double> total_weights;
    for (std::size_t b = 0; adversarial && b < batch.size(); ++b) {
      std::vector<gan::DiscriminatorOutput> real_out;
      {
        ag::NoGradGuard guard;
        real_out = bank_(real[b]);
      }
      const ag::Var probe(fake[b].value(), true);
      const auto fake_out = bank_(probe);
      const ag::Var adv = gan::generator_adversarial_loss(fake_out, cfg_.objective);
      const ag::Var feat = gan::feature_matching_loss(real_out, fake_out);
      adv_g += checked(adv.item(), "adv_g", report.step) * inv_batch;
      fm += checked(feat.item(), "fm", report.step) * inv_batch;
      ag::backward(ag::weighted_sum({adv, feat}, {w.adv * inv_batch, w.feat_match * inv_batch}));
      total_terms.push_back(inject_gradient(fake[b], probe.grad()));
      total_weights.push_back(1.0);
    }
    frozen.reset();

    const ag::Var mel = batch_mean(mel_terms);
    const ag::Var quant = batch_mean(quant_terms);
    const ag::Var dist = batch_mean(distill_terms);
    report.losses["mel"] = checked(mel.item(), "mel", report.step);
    report.losses["adv_g"] = adv_g;
    report.losses["fm"] = fm;
    report.losses["quant"] = checked(quant.item(), "quant", report.step);
    report.losses["distill"] = checked(dist.item(), "distill", report.step);

    total_terms.insert(total_terms.end(), {mel, quant, dist});
    total_weights.insert(total_weights.end(), {w.mel, w.quantizer, w.distill});
    gen_opt_.zero_grad();
    ag::backward(ag::weighted_sum(total_terms, total_weights));
    gen_opt_.step(report.lr);

    ema_update(ema_, model_.parameters());
    if (cfg_.codec.codebook.dead_code_reset) model_.quantizer().reset_dead_codes(report.step, recent_queries_, data_rng_);
    step_ = report.step;
    return report;
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.config = to_json(cfg_);
    c.step = step_;
    std::ostringstream rng;
    rng << data_rng_;
    c.extra = {{"rng", rng.str()}, {"gen_opt_steps", gen_opt_.step_count()}, {"disc_opt_steps", disc_opt_.step_count()}};
    const auto gen = generator_parameters();
    for (const auto& p : gen) c.tensors.emplace("gen/" + p.name, p.var.value());
    for (std::size_t i = 0; i < ema_.names.size(); ++i) c.tensors.emplace("ema/" + ema_.names[i], ema_.shadow[i]);
    for (std::size_t i = 0; i < gen.size(); ++i) {
      c.tensors.emplace("gen_opt.m/" + gen[i].name, gen_opt_.first_moments()[i]);
      c.tensors.emplace("gen_opt.v/" + gen[i].name, gen_opt_.second_moments()[i]);
    }
    const auto disc = bank_.parameters();
    for (std::size_t i = 0; i < disc.size(); ++i) {
      c.tensors.emplace("disc/" + disc[i].name, disc[i].var.value());
      c.tensors.emplace("disc_opt.m/" + disc[i].name, disc_opt_.first_moments()[i]);
      c.tensors.emplace("disc_opt.v/" + disc[i].name, disc_opt_.second_moments()[i]);
    }
    return c;
  }

  /// Restores a checkpoint written by a trainer with a compatible config.
  void restore(const Checkpoint& c) {
    const auto mine = to_json(cfg_);
    for (const char* section : {"codec", "discriminators"}) {
      if (!c.config.contains(section)) throw CheckpointError(std::string("checkpoint lacks '") + section + "' settings");
      const auto diff = first_difference(c.config.at(section), mine.at(section), section);
      if (!diff.empty()) {
        std::string pointer = "/" + diff;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        const nlohmann::json::json_pointer ptr(pointer);
        auto at = [&ptr](const nlohmann::json& j) { return j.contains(ptr) ? j.at(ptr).dump() : std::string("missing"); };
        throw ConfigError("checkpoint field " + diff + " (" + at(c.config) + ") does not match config (" + at(mine) + ")");
      }
    }
    auto fetch = [&c](const std::string& key, const Tensor& like) -> const Tensor& {
      auto it = c.tensors.find(key);
      if (it == c.tensors.end()) throw CheckpointError("checkpoint is missing tensor '" + key + "'");
      if (it->second.shape() != like.shape()) {
        throw CheckpointError("checkpoint tensor '" + key + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                              shape_string(like.shape()));
      }
      return it->second;
    };
    const auto gen = generator_parameters();
    for (std::size_t i = 0; i < gen.size(); ++i) {
      ag::Var v = gen[i].var;
      v.mutable_value() = fetch("gen/" + gen[i].name, v.value());
      gen_opt_.first_moments()[i] = fetch("gen_opt.m/" + gen[i].name, v.value());
      gen_opt_.second_moments()[i] = fetch("gen_opt.v/" + gen[i].name, v.value());
    }
    for (std::size_t i = 0; i < ema_.names.size(); ++i) ema_.shadow[i] = fetch("ema/" + ema_.names[i], ema_.shadow[i]);
    const auto disc = bank_.parameters();
    for (std::size_t i = 0; i < disc.size(); ++i) {
      ag::Var v = disc[i].var;
      v.mutable_value() = fetch("disc/" + disc[i].name, v.value());
      disc_opt_.first_moments()[i] = fetch("disc_opt.m/" + disc[i].name, v.value());
      disc_opt_.second_moments()[i] = fetch("disc_opt.v/" + disc[i].name, v.value());
    }
    try {
      std::istringstream rng(c.extra.at("rng").get<std::string>());
      rng >> data_rng_;
      gen_opt_.set_step_count(c.extra.at("gen_opt_steps").get<std::size_t>());
      disc_opt_.set_step_count(c.extra.at("disc_opt_steps").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(std::string("checkpoint training state unreadable: ") + e.what());
    }
    step_ = c.step;
  }

 private:
  static double checked(double v, const char* name, std::size_t step) {
    if (!std::isfinite(v)) throw NonFiniteLossError("non-finite " + std::string(name) + " loss at step " + std::to_string(step));
    return v;
  }

  /// Zero-valued scalar whose gradient with respect to `x` is `g`.
  static ag::Var inject_gradient(const ag::Var& x, const Tensor& g) {
    return ag::make_result(Tensor::scalar(0.0), {x}, [g](ag::Node& self) {
      ag::Node& p = *self.parents[0];
      if (!p.requires_grad) return;
      Tensor& dst = p.grad_buffer();
      const double s = self.grad[0];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * g[i];
    });
  }

  void set_discriminator_grad(bool on) {
    for (const auto& p : bank_.parameters()) p.var.node()->requires_grad = on;
  }

  static ag::Var batch_mean(const std::vector<ag::Var>& terms) {
    return ag::weighted_sum(terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
  }

  /// Sum over routed teachers of the per-frame mean distillation loss.
  ag::Var distill_term(const BatchItem& item, const codec::DecoderTrace& trace, const distill::TeacherRouting& routing) {
    if (!cfg_.distill.enabled) return ag::Var(Tensor::scalar(0.0));
    const ag::Var tap = cfg_.distill.stop_gradient ? ag::detach(trace.tap()) : trace.tap();
    const std::size_t frames = tap.value().rows();
    std::vector<ag::Var> terms;
    std::vector<double> weights;
    for (const auto& teacher : routing.route(item.domain)) {
      const Tensor target = teachers_.targets(item, teacher, frames);
      terms.push_back(distill::distill_loss(heads_(tap, teacher.name), ag::Var(target)));
      weights.push_back(cfg_.distill.weight_of(teacher.name) / static_cast<double>(frames));
    }
    return ag::weighted_sum(terms, weights);
  }

  TrainConfig cfg_;
  codec::CodecModel model_;
  gan::DiscriminatorBank bank_;
  distill::LearnerHeads heads_;
  TeacherBank teachers_;
  AdamW gen_opt_;
  AdamW disc_opt_;
  EmaState ema_;
  std::mt19937_64 data_rng_;
  std::size_t step_ = 0;
  Tensor recent_queries_;
};

/// Model and config restored from a checkpoint, with EMA weights loaded.
struct InferenceBundle {
  TrainConfig config;
  codec::CodecModel model;
};

inline InferenceBundle load_inference_model(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path);
  TrainConfig cfg = train_config_from_json(c.config, TrainConfig::desk());
  codec::CodecModel model(cfg.codec, cfg.seed);
  for (const auto& p : model.parameters()) {
    auto it = c.tensors.find("ema/" + p.name);
    if (it == c.tensors.end()) throw CheckpointError("checkpoint is missing tensor 'ema/" + p.name + "'");
    ag::Var v = p.var;
    if (it->second.shape() != v.value().shape()) throw CheckpointError("checkpoint tensor 'ema/" + p.name + "' has the wrong shape");
    v.mutable_value() = it->second;
  }
  return {std::move(cfg), std::move(model)};
}

}  // namespace auv::train
