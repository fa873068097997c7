#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "plcr/autodiff.hpp"
#include "plcr/prompt.hpp"

namespace plcr {

// Versioned binary container of named parameter blocks with shape headers, a
// frozen flag, and a checksum field.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  bool frozen = false;
  std::uint64_t checksum = 0;
  std::vector<std::pair<std::string, ad::Mat>> blocks;

  const ad::Mat& block(const std::string& name) const;
  bool has_block(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

Checkpoint backbone_to_checkpoint(const BackboneParams& params);
BackboneParams backbone_from_checkpoint(const Checkpoint& ckpt);

// Prompt checkpoints embed the backbone checksum they were trained against;
// loading against a different backbone fails.
Checkpoint prompts_to_checkpoint(const PlcrModel& model);
void prompts_from_checkpoint(const Checkpoint& ckpt, PlcrModel& model);

}  // namespace plcr
