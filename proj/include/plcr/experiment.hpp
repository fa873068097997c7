#pragma once

#include <cstdint>
#include <string>

#include "plcr/backbone.hpp"
#include "plcr/config.hpp"
#include "plcr/eval.hpp"
#include "plcr/manifest.hpp"
#include "plcr/prompt.hpp"
#include "plcr/training.hpp"

namespace plcr {

// Everything a run needs beyond the data: backbone shape, pre-training
// schedule, prompt shape, prompt-optimization schedule.
struct ExperimentParams {
  BackboneConfig backbone;
  PretrainConfig pretrain;
  PromptEncoderConfig enc;
  TrainConfig train;
  int m1 = 5;
  int m2 = 5;
  PromptLayout layout = PromptLayout::label_end;
};

ExperimentParams params_from_config(const Config& cfg);
// All keys with their defaults, so configs round-trip losslessly.
Config experiment_config_defaults();

struct VariantRun {
  MetricsReport report;
  TrainResult train;
};

// Full prompt-training + evaluation pipeline for one variant. The jointly
// pre-trained backbone is reused for every prompt-level variant;
// single_backbone pre-trains one backbone per domain instead.
VariantRun run_variant_experiment(Variant variant, const Manifest& data,
                                  const BackboneParams& joint_backbone,
                                  const ExperimentParams& params,
                                  std::uint64_t seed,
                                  const std::string& fingerprint);

}  // namespace plcr
