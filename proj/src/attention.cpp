#include "plcr/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace plcr {

namespace {

ad::Mat normal_init(int rows, int cols, std::mt19937_64& rng, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  ad::Mat m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace

BlockParams BlockParams::init(int dim, std::mt19937_64& rng) {
  BlockParams p;
  p.wq = normal_init(dim, dim, rng, 0.02);
  p.wk = normal_init(dim, dim, rng, 0.02);
  p.wv = normal_init(dim, dim, rng, 0.02);
  p.ffn_w1 = normal_init(dim, dim, rng, 0.02);
  p.ffn_w2 = normal_init(dim, dim, rng, 0.02);
  p.ffn_b1 = ad::Mat::Zero(1, dim);
  p.ffn_b2 = ad::Mat::Zero(1, dim);
  p.ln1_gain = ad::Mat::Ones(1, dim);
  p.ln1_bias = ad::Mat::Zero(1, dim);
  p.ln2_gain = ad::Mat::Ones(1, dim);
  p.ln2_bias = ad::Mat::Zero(1, dim);
  return p;
}

BlockVars register_block(ad::Tape& tape, BlockParams& params, bool trainable,
                         std::vector<ParamBinding>* bindings) {
  BlockVars v;
  auto reg = [&](ad::Mat& m) {
    ad::Var var = tape.leaf(m, trainable);
    if (trainable && bindings) bindings->push_back({&m, var});
    return var;
  };
  v.wq = reg(params.wq);
  v.wk = reg(params.wk);
  v.wv = reg(params.wv);
  v.ffn_w1 = reg(params.ffn_w1);
  v.ffn_b1 = reg(params.ffn_b1);
  v.ffn_w2 = reg(params.ffn_w2);
  v.ffn_b2 = reg(params.ffn_b2);
  v.ln1_gain = reg(params.ln1_gain);
  v.ln1_bias = reg(params.ln1_bias);
  v.ln2_gain = reg(params.ln2_gain);
  v.ln2_bias = reg(params.ln2_bias);
  return v;
}

ad::Var apply_block(ad::Tape& tape, ad::Var x, const BlockVars& vars, int heads,
                    bool causal, double dropout_rate) {
  const int tokens = static_cast<int>(x.value().rows());
  const int dim = static_cast<int>(x.value().cols());
  if (heads < 1 || dim % heads != 0)
    throw std::invalid_argument("apply_block: heads must divide dim");
  const int head_dim = dim / heads;

  ad::Var q = tape.matmul(x, vars.wq);
  ad::Var k = tape.matmul(x, vars.wk);
  ad::Var v = tape.matmul(x, vars.wv);

  ad::Mat mask = ad::Mat::Zero(tokens, tokens);
  if (causal) {
    for (int r = 0; r < tokens; ++r)
      for (int c = r + 1; c < tokens; ++c) mask(r, c) = -1e9;
  }

  std::vector<ad::Var> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    ad::Var qh = heads == 1 ? q : tape.slice_cols(q, h * head_dim, head_dim);
    ad::Var kh = heads == 1 ? k : tape.slice_cols(k, h * head_dim, head_dim);
    ad::Var vh = heads == 1 ? v : tape.slice_cols(v, h * head_dim, head_dim);
    ad::Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)),
                                1.0 / std::sqrt(static_cast<double>(head_dim)));
    if (causal) scores = tape.add_constant(scores, mask);
    ad::Var attn = tape.softmax_rows(scores);
    head_outs.push_back(tape.matmul(attn, vh));
  }
  ad::Var h_out = head_outs[0];
  for (std::size_t i = 1; i < head_outs.size(); ++i)
    h_out = tape.concat_cols(h_out, head_outs[i]);

  ad::Var x1 = tape.layer_norm_rows(tape.add(x, tape.dropout(h_out, dropout_rate)),
                                    vars.ln1_gain, vars.ln1_bias);
  ad::Var ffn = tape.add_rowwise(
      tape.matmul(
          tape.relu(tape.add_rowwise(tape.matmul(x1, vars.ffn_w1), vars.ffn_b1)),
          vars.ffn_w2),
      vars.ffn_b2);
  return tape.layer_norm_rows(tape.add(x1, tape.dropout(ffn, dropout_rate)),
                              vars.ln2_gain, vars.ln2_bias);
}

}  // namespace plcr
