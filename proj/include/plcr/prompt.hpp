#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plcr/attention.hpp"
#include "plcr/autodiff.hpp"
#include "plcr/backbone.hpp"
#include "plcr/types.hpp"

namespace plcr {

enum class PromptLayout { label_end, label_middle, label_front };

const char* layout_name(PromptLayout layout);
PromptLayout layout_from_name(const std::string& name);

// Trainable prompt state: shared domain-independent tokens [v], per-domain
// tokens [d]^A / [d]^B. Label rows come from the frozen backbone item table
// and are never stored here. separate_shared gives each domain its own [v]
// copy (the no-separation ablation).
struct PromptSet {
  int m1 = 5;
  int m2 = 5;
  int dim = 0;
  PromptLayout layout = PromptLayout::label_end;
  bool separate_shared = false;
  ad::Mat shared;    // m1 x dim
  ad::Mat shared_b;  // m1 x dim, only used when separate_shared
  ad::Mat domain_a;  // m2 x dim
  ad::Mat domain_b;  // m2 x dim

  int tokens() const { return m1 + m2 + 1; }
  const ad::Mat& shared_view(Domain d) const {
    return separate_shared && d == Domain::B ? shared_b : shared;
  }
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("prompt.shared", shared);
    if (separate_shared) fn("prompt.shared_b", shared_b);
    fn("prompt.domain_a", domain_a);
    fn("prompt.domain_b", domain_b);
  }
};

struct PromptEncoderConfig {
  int blocks = 2;
  int heads = 1;
  double dropout = 0.2;
  int agg_hidden = 0;  // 0 = same as dim
  bool use_positional = true;
  bool attention_aggregation = true;  // false = uniform mean (no-attention)
};

// One per domain: attention/FFN blocks, prompt positional embeddings, and
// the label-guided aggregation MLP.
struct PromptEncoderParams {
  std::vector<BlockParams> blocks;
  ad::Mat pos_emb;  // tokens x dim
  ad::Mat agg_w1;   // 2*dim x hidden
  ad::Mat agg_b1;   // 1 x hidden
  ad::Mat agg_w2;   // hidden x 1
  ad::Mat agg_b2;   // 1 x 1

  template <typename Fn>
  void for_each(const std::string& prefix, Fn&& fn) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].for_each(prefix + ".block" + std::to_string(i), fn);
    fn(prefix + ".pos_emb", pos_emb);
    fn(prefix + ".agg_w1", agg_w1);
    fn(prefix + ".agg_b1", agg_b1);
    fn(prefix + ".agg_w2", agg_w2);
    fn(prefix + ".agg_b2", agg_b2);
  }
};

PromptSet init_prompt_set(int m1, int m2, int dim, PromptLayout layout,
                          std::uint64_t seed, bool separate_shared = false);
PromptEncoderParams init_prompt_encoder(const PromptEncoderConfig& cfg, int dim,
                                        int tokens, std::uint64_t seed);

// Full model bundle: frozen backbone + vocab + trainable prompt state.
struct PlcrModel {
  BackboneParams backbone;
  std::uint64_t backbone_checksum = 0;
  DomainVocab vocab;
  PromptSet prompts;
  PromptEncoderConfig enc_cfg;
  PromptEncoderParams encoder_a;
  PromptEncoderParams encoder_b;

  const PromptEncoderParams& encoder(Domain d) const {
    return d == Domain::A ? encoder_a : encoder_b;
  }
  PromptEncoderParams& encoder(Domain d) {
    return d == Domain::A ? encoder_a : encoder_b;
  }
};

PlcrModel init_model(BackboneParams backbone, DomainVocab vocab, int m1, int m2,
                     PromptLayout layout, const PromptEncoderConfig& enc_cfg,
                     std::uint64_t seed);

// Eval-mode operations (dropout off, plain matrices).
ad::Mat compose_prompt(int item_id, Domain domain, const PlcrModel& model);
ad::Mat encode_prompt(const ad::Mat& prompt, const PromptEncoderParams& params,
                      const PromptEncoderConfig& cfg);
Eigen::RowVectorXd aggregate_tokens(const ad::Mat& x,
                                    const Eigen::RowVectorXd& label_emb,
                                    const PromptEncoderParams& params,
                                    const PromptEncoderConfig& cfg);
Eigen::RowVectorXd prompt_vector(int item_id, Domain domain,
                                 const PlcrModel& model);
// g(.) for every item of the domain, one row per local item id.
ad::Mat all_prompt_vectors(Domain domain, const PlcrModel& model);

// Tape wiring for one domain's training phase. The backbone item table is
// registered as a constant so label rows are structurally cut off from
// gradients.
struct PromptPhaseVars {
  ad::Var shared_tokens;
  ad::Var domain_tokens;
  ad::Var item_table;  // constant leaf over the frozen backbone embeddings
  std::vector<BlockVars> blocks;
  ad::Var pos_emb, agg_w1, agg_b1, agg_w2, agg_b2;
};

PromptPhaseVars register_prompt_phase(ad::Tape& tape, PlcrModel& model,
                                      Domain domain, bool trainable,
                                      std::vector<ParamBinding>* bindings);

// g(t_k) for one item (1 x dim) built on the tape; local_item indexes inside
// the domain's own id range.
ad::Var prompt_vector_on_tape(ad::Tape& tape, const PromptPhaseVars& vars,
                              const PlcrModel& model, Domain domain,
                              int local_item);

}  // namespace plcr
