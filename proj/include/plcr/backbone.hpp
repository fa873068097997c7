#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "plcr/attention.hpp"
#include "plcr/autodiff.hpp"
#include "plcr/types.hpp"

namespace plcr {

struct BackboneConfig {
  int dim = 50;
  int max_len = 77;
  int blocks = 2;
  int heads = 1;
  double dropout = 0.2;
};

// The pre-trained sequence encoder f(.) plus the unified item embedding
// table. Both domains share one table; domain B rows start at the vocab
// offset. Once frozen, parameters must never change (checksum-enforced).
struct BackboneParams {
  BackboneConfig cfg;
  int vocab_size = 0;
  ad::Mat item_emb;  // vocab_size x dim
  ad::Mat pos_emb;   // max_len x dim
  std::vector<BlockParams> blocks;
  bool frozen = false;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("item_emb", item_emb);
    fn("pos_emb", pos_emb);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].for_each("block" + std::to_string(i), fn);
  }
};

BackboneParams init_backbone(const BackboneConfig& cfg, int vocab_size,
                             std::uint64_t seed);

// Digest over all parameter blocks in a fixed order (freeze contract).
std::uint64_t backbone_checksum(const BackboneParams& params);

struct EncoderOutput {
  ad::Mat hidden;             // length x dim
  Eigen::RowVectorXd repr;    // hidden state at the last occupied position
};

// Eval-mode (no dropout) forward helpers.
ad::Mat embed_sequence(const std::vector<int>& prefix, const BackboneParams& params);
EncoderOutput encode_sequence(const std::vector<int>& prefix,
                              const BackboneParams& params);
double score_next(const Eigen::RowVectorXd& seq_repr, int item_id,
                  const BackboneParams& params);

// Tape wiring for training / gradient checks.
struct BackboneVars {
  ad::Var item_emb;
  ad::Var pos_emb;
  std::vector<BlockVars> blocks;
};

BackboneVars register_backbone(ad::Tape& tape, BackboneParams& params,
                               bool trainable,
                               std::vector<ParamBinding>* bindings);
ad::Var embed_on_tape(ad::Tape& tape, const BackboneVars& vars,
                      const BackboneParams& params, const std::vector<int>& ids);
ad::Var encode_on_tape(ad::Tape& tape, const BackboneVars& vars,
                       const BackboneParams& params, const std::vector<int>& ids);

// Eq.-1-style binary cross entropy over one sequence: at each step the
// positive is the next item and one uniform in-domain negative is drawn.
// Returns the summed per-step loss node (caller normalizes).
ad::Var sequence_bce_on_tape(ad::Tape& tape, const BackboneVars& vars,
                             const BackboneParams& params,
                             const std::vector<int>& input_ids,
                             const std::vector<int>& positives,
                             const std::vector<int>& negatives);

struct PretrainConfig {
  double learning_rate = 0.05;
  int epochs = 200;
  int batch_size = 128;
  std::uint64_t seed = 1;
  bool early_stop = true;
  int eval_every = 5;    // validation HR@10 cadence for early stopping
  int patience = 3;      // evaluations without improvement before stopping
};

struct PretrainResult {
  BackboneParams params;  // frozen on return
  std::vector<double> epoch_losses;
  std::uint64_t checksum = 0;
};

PretrainResult pretrain_joint(const DomainSplit& split_a,
                              const DomainSplit& split_b,
                              const DomainVocab& vocab,
                              const BackboneConfig& cfg,
                              const PretrainConfig& train_cfg);

// Backbone trained on one domain only (the PLCR-single variant). The item
// table still spans the unified vocabulary; rows of the other domain keep
// their random initialization.
PretrainResult pretrain_single(const DomainSplit& split, const DomainVocab& vocab,
                               const BackboneConfig& cfg,
                               const PretrainConfig& train_cfg);

// HR@K of the raw backbone scorer over a list of sequences (used for early
// stopping during pre-training).
double backbone_hr_at_k(const BackboneParams& params, const DomainVocab& vocab,
                        const std::vector<SequenceExample>& examples, int k);

}  // namespace plcr
