#pragma once

#include <cstdint>
#include <utility>

#include "plcr/types.hpp"

namespace plcr {

// Paired-domain generator with planted cluster-level interests. Both domains
// are driven by the same latent clusters, so domain-independent structure
// exists even though user/item id spaces are disjoint.
struct SynthConfig {
  int n_clusters = 4;
  int users_per_domain = 500;
  int items_per_domain = 200;
  int min_seq_len = 8;
  int max_seq_len = 20;
  double p_in = 0.8;           // probability an interaction stays in-cluster
  double zipf_exponent = 0.0;  // 0 = uniform within the chosen item pool
  std::uint64_t seed = 1;
};

std::pair<InteractionLog, InteractionLog> gen_dual_domain(const SynthConfig& cfg);

}  // namespace plcr
