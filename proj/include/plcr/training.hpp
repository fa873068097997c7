#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plcr/prompt.hpp"
#include "plcr/types.hpp"

namespace plcr {

enum class Schedule { sequential_two_stage, epoch_interleaved };

const char* schedule_name(Schedule s);
Schedule schedule_from_name(const std::string& name);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  int epochs = 200;
  Schedule schedule = Schedule::epoch_interleaved;
  std::uint64_t seed = 1;
  double temperature = 1.0;  // divides the inner-product logits
  bool select_best = true;   // keep the checkpoint with best summed val HR@10
  int eval_every = 5;
};

struct LossRecord {
  int epoch = 0;
  Domain phase = Domain::A;
  double loss = 0.0;
  double grad_norm = 0.0;
};

// Eq.-12 matching distribution over the domain's items (full softmax,
// max-logit stabilized). Index i is the domain-local item id.
Eigen::VectorXd match_distribution(const SequenceExample& seq, Domain domain,
                                   const PlcrModel& model,
                                   double temperature = 1.0);

// Mean -log p(y) over a batch, eval mode.
double domain_loss(const std::vector<SequenceExample>& batch, Domain domain,
                   const PlcrModel& model, double temperature = 1.0);

struct TrainResult {
  std::vector<LossRecord> records;
  double best_val_hr10_sum = 0.0;
};

// Prompt optimization with the separation constraint. model_a and model_b may
// alias (the standard unified-backbone setup); when they are distinct
// (single-backbone variant) the shared [v] tokens are synchronized across the
// two models between phases so the domain-independent context stays shared.
TrainResult train_prompts(const TrainConfig& cfg, const DatasetSplit& data,
                          PlcrModel& model_a, PlcrModel& model_b);
TrainResult train_prompts(const TrainConfig& cfg, const DatasetSplit& data,
                          PlcrModel& model);

// Freeze contract. Per-block digests let a violation name the first
// offending block.
std::vector<std::pair<std::string, std::uint64_t>> block_checksums(
    const BackboneParams& params);
void assert_frozen(
    const std::vector<std::pair<std::string, std::uint64_t>>& before,
    const BackboneParams& params);

}  // namespace plcr
