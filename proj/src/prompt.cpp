#include "plcr/prompt.hpp"

#include <random>
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

int agg_hidden(const PromptEncoderConfig& cfg, int dim) {
  return cfg.agg_hidden > 0 ? cfg.agg_hidden : dim;
}

void register_encoder(ad::Tape& tape, PromptEncoderParams& enc, bool trainable,
                      std::vector<ParamBinding>* bindings, PromptPhaseVars& out) {
  auto reg = [&](ad::Mat& m) {
    ad::Var var = tape.leaf(m, trainable);
    if (trainable && bindings) bindings->push_back({&m, var});
    return var;
  };
  for (auto& b : enc.blocks)
    out.blocks.push_back(register_block(tape, b, trainable, bindings));
  out.pos_emb = reg(enc.pos_emb);
  out.agg_w1 = reg(enc.agg_w1);
  out.agg_b1 = reg(enc.agg_b1);
  out.agg_w2 = reg(enc.agg_w2);
  out.agg_b2 = reg(enc.agg_b2);
}

ad::Var encode_tokens(ad::Tape& tape, ad::Var tokens,
                      const PromptPhaseVars& vars,
                      const PromptEncoderConfig& cfg) {
  ad::Var x = tokens;
  if (cfg.use_positional) x = tape.add(x, vars.pos_emb);
  x = tape.dropout(x, cfg.dropout);
  for (const auto& block : vars.blocks)
    x = apply_block(tape, x, block, cfg.heads, /*causal=*/false, cfg.dropout);
  return x;
}

ad::Var aggregate(ad::Tape& tape, ad::Var x, ad::Var label,
                  const PromptPhaseVars& vars, const PromptEncoderConfig& cfg) {
  const int tokens = static_cast<int>(x.value().rows());
  if (!cfg.attention_aggregation) {
    ad::Mat uniform = ad::Mat::Constant(1, tokens, 1.0 / tokens);
    return tape.matmul(tape.constant(uniform), x);
  }
  ad::Var ctx = tape.concat_cols(tape.repeat_row(label, tokens), x);
  ad::Var hidden =
      tape.relu(tape.add_rowwise(tape.matmul(ctx, vars.agg_w1), vars.agg_b1));
  ad::Var scores =
      tape.add_rowwise(tape.matmul(hidden, vars.agg_w2), vars.agg_b2);  // T x 1
  ad::Var gamma = tape.softmax_rows(tape.transpose(scores));            // 1 x T
  return tape.matmul(gamma, x);
}

ad::Var compose_on_tape(ad::Tape& tape, const PromptPhaseVars& vars,
                        const PlcrModel& model, Domain domain, int local_item) {
  if (local_item < 0 || local_item >= model.vocab.count(domain))
    throw std::out_of_range("compose_prompt: item outside its domain");
  int global = model.vocab.base(domain) + local_item;
  ad::Var label = tape.gather_rows(vars.item_table, {global});
  std::vector<ad::Var> rows;
  bool has_shared = model.prompts.m1 > 0;
  bool has_domain = model.prompts.m2 > 0;
  switch (model.prompts.layout) {
    case PromptLayout::label_end:
      if (has_shared) rows.push_back(vars.shared_tokens);
      if (has_domain) rows.push_back(vars.domain_tokens);
      rows.push_back(label);
      break;
    case PromptLayout::label_middle:
      if (has_shared) rows.push_back(vars.shared_tokens);
      rows.push_back(label);
      if (has_domain) rows.push_back(vars.domain_tokens);
      break;
    case PromptLayout::label_front:
      rows.push_back(label);
      if (has_shared) rows.push_back(vars.shared_tokens);
      if (has_domain) rows.push_back(vars.domain_tokens);
      break;
  }
  return tape.stack_rows(rows);
}

}  // namespace

const char* layout_name(PromptLayout layout) {
  switch (layout) {
    case PromptLayout::label_end: return "end";
    case PromptLayout::label_middle: return "middle";
    case PromptLayout::label_front: return "front";
  }
  return "end";
}

PromptLayout layout_from_name(const std::string& name) {
  if (name == "end") return PromptLayout::label_end;
  if (name == "middle") return PromptLayout::label_middle;
  if (name == "front") return PromptLayout::label_front;
  throw std::invalid_argument("unknown prompt layout: " + name);
}

PromptSet init_prompt_set(int m1, int m2, int dim, PromptLayout layout,
                          std::uint64_t seed, bool separate_shared) {
  if (m1 < 0 || m2 < 0 || m1 + m2 == 0)
    throw std::invalid_argument("init_prompt_set: need at least one context token");
  std::mt19937_64 rng(seed);
  PromptSet p;
  p.m1 = m1;
  p.m2 = m2;
  p.dim = dim;
  p.layout = layout;
  p.separate_shared = separate_shared;
  p.shared = m1 > 0 ? normal_init(m1, dim, rng, 0.02) : ad::Mat(0, dim);
  p.shared_b = separate_shared ? p.shared : ad::Mat(0, dim);
  p.domain_a = m2 > 0 ? normal_init(m2, dim, rng, 0.02) : ad::Mat(0, dim);
  p.domain_b = m2 > 0 ? normal_init(m2, dim, rng, 0.02) : ad::Mat(0, dim);
  return p;
}

PromptEncoderParams init_prompt_encoder(const PromptEncoderConfig& cfg, int dim,
                                        int tokens, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PromptEncoderParams p;
  for (int b = 0; b < cfg.blocks; ++b)
    p.blocks.push_back(BlockParams::init(dim, rng));
  p.pos_emb = normal_init(tokens, dim, rng, 0.02);
  int hidden = agg_hidden(cfg, dim);
  p.agg_w1 = normal_init(2 * dim, hidden, rng, 0.02);
  p.agg_b1 = ad::Mat::Zero(1, hidden);
  p.agg_w2 = normal_init(hidden, 1, rng, 0.02);
  p.agg_b2 = ad::Mat::Zero(1, 1);
  return p;
}

PlcrModel init_model(BackboneParams backbone, DomainVocab vocab, int m1, int m2,
                     PromptLayout layout, const PromptEncoderConfig& enc_cfg,
                     std::uint64_t seed) {
  PlcrModel model;
  model.backbone_checksum = backbone_checksum(backbone);
  model.backbone = std::move(backbone);
  model.vocab = std::move(vocab);
  model.enc_cfg = enc_cfg;
  model.prompts = init_prompt_set(m1, m2, model.backbone.cfg.dim, layout, seed);
  int tokens = model.prompts.tokens();
  model.encoder_a =
      init_prompt_encoder(enc_cfg, model.backbone.cfg.dim, tokens, seed ^ 0xA);
  model.encoder_b =
      init_prompt_encoder(enc_cfg, model.backbone.cfg.dim, tokens, seed ^ 0xB);
  return model;
}

PromptPhaseVars register_prompt_phase(ad::Tape& tape, PlcrModel& model,
                                      Domain domain, bool trainable,
                                      std::vector<ParamBinding>* bindings) {
  PromptPhaseVars vars;
  auto reg = [&](ad::Mat& m) {
    ad::Var var = tape.leaf(m, trainable);
    if (trainable && bindings) bindings->push_back({&m, var});
    return var;
  };
  ad::Mat& shared = model.prompts.separate_shared && domain == Domain::B
                        ? model.prompts.shared_b
                        : model.prompts.shared;
  ad::Mat& dom =
      domain == Domain::A ? model.prompts.domain_a : model.prompts.domain_b;
  vars.shared_tokens = reg(shared);
  vars.domain_tokens = reg(dom);
  vars.item_table = tape.leaf(model.backbone.item_emb, false);  // frozen
  register_encoder(tape, model.encoder(domain), trainable, bindings, vars);
  return vars;
}

ad::Var prompt_vector_on_tape(ad::Tape& tape, const PromptPhaseVars& vars,
                              const PlcrModel& model, Domain domain,
                              int local_item) {
  ad::Var tokens = compose_on_tape(tape, vars, model, domain, local_item);
  ad::Var x = encode_tokens(tape, tokens, vars, model.enc_cfg);
  int global = model.vocab.base(domain) + local_item;
  ad::Var label = tape.gather_rows(vars.item_table, {global});
  return aggregate(tape, x, label, vars, model.enc_cfg);
}

ad::Mat compose_prompt(int item_id, Domain domain, const PlcrModel& model) {
  if (!model.vocab.in_domain(item_id, domain))
    throw std::out_of_range("compose_prompt: item outside its domain");
  ad::Tape tape;
  PromptPhaseVars vars = register_prompt_phase(
      tape, const_cast<PlcrModel&>(model), domain, false, nullptr);
  return compose_on_tape(tape, vars, model, domain,
                         model.vocab.local_index(item_id, domain))
      .value();
}

ad::Mat encode_prompt(const ad::Mat& prompt, const PromptEncoderParams& params,
                      const PromptEncoderConfig& cfg) {
  ad::Tape tape;
  PromptPhaseVars vars;
  register_encoder(tape, const_cast<PromptEncoderParams&>(params), false,
                   nullptr, vars);
  return encode_tokens(tape, tape.constant(prompt), vars, cfg).value();
}

Eigen::RowVectorXd aggregate_tokens(const ad::Mat& x,
                                    const Eigen::RowVectorXd& label_emb,
                                    const PromptEncoderParams& params,
                                    const PromptEncoderConfig& cfg) {
  ad::Tape tape;
  PromptPhaseVars vars;
  register_encoder(tape, const_cast<PromptEncoderParams&>(params), false,
                   nullptr, vars);
  ad::Var z = aggregate(tape, tape.constant(x), tape.constant(label_emb), vars, cfg);
  return z.value().row(0);
}

Eigen::RowVectorXd prompt_vector(int item_id, Domain domain,
                                 const PlcrModel& model) {
  if (!model.vocab.in_domain(item_id, domain))
    throw std::out_of_range("prompt_vector: item outside its domain");
  ad::Tape tape;
  PromptPhaseVars vars = register_prompt_phase(
      tape, const_cast<PlcrModel&>(model), domain, false, nullptr);
  return prompt_vector_on_tape(tape, vars, model, domain,
                               model.vocab.local_index(item_id, domain))
      .value()
      .row(0);
}

ad::Mat all_prompt_vectors(Domain domain, const PlcrModel& model) {
  int n = model.vocab.count(domain);
  ad::Mat z(n, model.backbone.cfg.dim);
  ad::Tape tape;
  PromptPhaseVars vars = register_prompt_phase(
      tape, const_cast<PlcrModel&>(model), domain, false, nullptr);
  for (int i = 0; i < n; ++i)
    z.row(i) = prompt_vector_on_tape(tape, vars, model, domain, i).value().row(0);
  return z;
}

}  // namespace plcr
