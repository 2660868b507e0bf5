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

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "auv/train/trainer.hpp"

namespace auv::train {

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  bool log_indices = true;  ///< include per-item token indices in the JSON-lines log
  std::function<void(const StepReport&)> on_step;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "step_%08zu.auvc", step);
  return dir / name;
}

/// Trains until cfg.total_steps, writing train_log.jsonl, periodic checkpoints
/// and final.auvc into out_dir. Returns the final step count.
inline std::size_t run_training(Trainer& trainer, const std::vector<ManifestEntry>& entries, const RunOptions& opt) {
  if (entries.empty()) throw ConfigError("train: manifest has no entries");
  std::filesystem::create_directories(opt.out_dir);
  if (opt.resume) {
    trainer.restore(load_checkpoint(*opt.resume));
    spdlog::info("resumed from {} at step {}", opt.resume->string(), trainer.step_count());
  }
  const auto& cfg = trainer.config();
  std::ofstream log(opt.out_dir / "train_log.jsonl", opt.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + (opt.out_dir / "train_log.jsonl").string());
  ClipLoader loader(cfg.codec.sample_rate);
  while (trainer.step_count() < cfg.total_steps) {
    const auto batch = make_batch(entries, cfg, trainer.data_rng(), loader);
    const StepReport report = trainer.step(batch);
    log << report.to_json(opt.log_indices).dump() << '\n';
    if (opt.on_step) opt.on_step(report);
    if (report.step % cfg.checkpoint_every == 0) save_checkpoint(trainer.checkpoint(), checkpoint_path(opt.out_dir, report.step));
  }
  log.flush();
  save_checkpoint(trainer.checkpoint(), opt.out_dir / "final.auvc");
  return trainer.step_count();
}

}  // namespace auv::train
