#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "ifdl/data.hpp"
#include "ifdl/model.hpp"
#include "ifdl/params.hpp"

namespace ifdl::train {

struct OptimizerConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.0;
  double epsilon = 1e-8;

  void validate() const;
};

struct ScheduleConfig {
  long warmup_steps = 100;
  long total_steps = 10000;

  void validate() const;
};

// Linear 0 -> peak over the warmup, then linear peak -> 0 over the rest.
double lr_at(long step, double peak, const ScheduleConfig& schedule);

using GradMap = std::map<std::string, ag::Mat>;

// Global-L2-norm clipping across all gradients. Returns the applied scale
// (1.0 when the norm is within bounds). Non-finite gradients are an error.
double clip_gradients(GradMap& grads, double max_norm);

// AdamW with decoupled weight decay. Moments are keyed by parameter name
// and serialized alongside the step counter for bit-exact resume.
class AdamW {
 public:
  explicit AdamW(OptimizerConfig config) : config_(std::move(config)) {
    config_.validate();
  }

  void step(ParamStore& params, const GradMap& grads, double lr);

  long steps_taken() const { return t_; }
  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  OptimizerConfig config_;
  long t_ = 0;
  std::map<std::string, std::pair<ag::Mat, ag::Mat>> moments_;
};

struct LossRecord {
  long step = 0;
  double lr = 0.0;
  double total = 0.0;
  double bce = 0.0;
  double dice = 0.0;
  double ce = 0.0;
  double clip_scale = 1.0;
};

// Resumable training state. Serializing and reloading reproduces the
// subsequent trajectory bit-for-bit (all math runs at 64-bit precision).
struct TrainState {
  long step = 0;
  long epoch = 0;
  long cursor = 0;  // position within the current epoch's shuffled order
  uint64_t seed = 0;
  std::vector<LossRecord> history;
};

struct LoopConfig {
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  long steps = 500;      // optimizer steps to reach
  long batch = 4;        // micro-batch size
  long accum = 1;        // micro-batches per optimizer step
  double grad_clip = 1.0;
  uint64_t seed = 0;
};

// Stage-1 loop: AdamW with gradient accumulation and clipping over the
// composite detection + localization objective. Fully synthetic samples
// contribute the detection term only; Real samples train against all-zero
// masks. Deterministic per seed; NaN losses abort naming the batch samples.
TrainState train_stage1(const data::DatasetManifest& manifest,
                        model::Stage1Model& model, const LoopConfig& config,
                        const std::filesystem::path& out_dir,
                        bool resume = false);

struct Stage2LoopConfig : LoopConfig {
  double alpha = 0.5;  // ground-truth masks gate training via the region blend
};

// Stage-2 loop: only the language head and adapter update; the encoder
// stays frozen. Trains on records carrying explanations.
TrainState train_stage2(const data::DatasetManifest& manifest,
                        model::Stage2Model& model,
                        const Stage2LoopConfig& config,
                        const std::filesystem::path& out_dir,
                        bool resume = false);

void save_state(const TrainState& state, const std::filesystem::path& dir);
TrainState load_state(const std::filesystem::path& dir);

// Epoch ordering: a shuffle keyed by (seed, epoch) so resumption replays
// the identical sequence.
std::vector<size_t> epoch_order(size_t n, uint64_t seed, long epoch);

}  // namespace ifdl::train
