#pragma once

#include <random>
#include <string>
#include <vector>

#include "plcr/autodiff.hpp"

namespace plcr {

// One self-attention block: single projection matrices with optional head
// splitting, point-wise two-layer ReLU FFN, residual + post-norm per sublayer.
struct BlockParams {
  ad::Mat wq, wk, wv;                      // d x d
  ad::Mat ffn_w1, ffn_w2;                  // d x d
  ad::Mat ffn_b1, ffn_b2;                  // 1 x d
  ad::Mat ln1_gain, ln1_bias;              // 1 x d
  ad::Mat ln2_gain, ln2_bias;              // 1 x d

  static BlockParams init(int dim, std::mt19937_64& rng);
  template <typename Fn>
  void for_each(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".wq", wq);
    fn(prefix + ".wk", wk);
    fn(prefix + ".wv", wv);
    fn(prefix + ".ffn_w1", ffn_w1);
    fn(prefix + ".ffn_b1", ffn_b1);
    fn(prefix + ".ffn_w2", ffn_w2);
    fn(prefix + ".ffn_b2", ffn_b2);
    fn(prefix + ".ln1_gain", ln1_gain);
    fn(prefix + ".ln1_bias", ln1_bias);
    fn(prefix + ".ln2_gain", ln2_gain);
    fn(prefix + ".ln2_bias", ln2_bias);
  }
};

// Parameter leaf paired with its backing storage so an optimizer can apply
// the accumulated gradient after backward.
struct ParamBinding {
  ad::Mat* storage = nullptr;
  ad::Var var;
};

struct BlockVars {
  ad::Var wq, wk, wv, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  ad::Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

// Registers block parameters on the tape. When trainable, bindings are
// appended for the optimizer; otherwise the leaves are constants and receive
// no gradient.
BlockVars register_block(ad::Tape& tape, BlockParams& params, bool trainable,
                         std::vector<ParamBinding>* bindings);

// x is (tokens x d). causal masks attention strictly above the diagonal.
ad::Var apply_block(ad::Tape& tape, ad::Var x, const BlockVars& vars, int heads,
                    bool causal, double dropout_rate);

}  // namespace plcr
