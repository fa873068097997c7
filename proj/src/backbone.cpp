#include "plcr/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "plcr/checksum.hpp"

namespace plcr {

namespace {

ad::Mat normal_init(int rows, int cols, std::mt19937_64& rng, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  ad::Mat m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  return m;
}

void check_ids(const std::vector<int>& ids, const BackboneParams& params) {
  if (static_cast<int>(ids.size()) > params.cfg.max_len)
    throw std::invalid_argument("sequence longer than max_len");
  for (int id : ids)
    if (id < 0 || id >= params.vocab_size)
      throw std::out_of_range("item id outside the unified vocabulary");
}

}  // namespace

BackboneParams init_backbone(const BackboneConfig& cfg, int vocab_size,
                             std::uint64_t seed) {
  if (vocab_size < 1) throw std::invalid_argument("init_backbone: empty vocab");
  std::mt19937_64 rng(seed);
  BackboneParams p;
  p.cfg = cfg;
  p.vocab_size = vocab_size;
  p.item_emb = normal_init(vocab_size, cfg.dim, rng, 0.02);
  p.pos_emb = normal_init(cfg.max_len, cfg.dim, rng, 0.02);
  for (int b = 0; b < cfg.blocks; ++b)
    p.blocks.push_back(BlockParams::init(cfg.dim, rng));
  return p;
}

std::uint64_t backbone_checksum(const BackboneParams& params) {
  Fnv1a h;
  const_cast<BackboneParams&>(params).for_each(
      [&h](const std::string& name, const ad::Mat& m) {
        h.update(name);
        h.update(m);
      });
  return h.digest();
}

BackboneVars register_backbone(ad::Tape& tape, BackboneParams& params,
                               bool trainable,
                               std::vector<ParamBinding>* bindings) {
  BackboneVars v;
  auto reg = [&](ad::Mat& m) {
    ad::Var var = tape.leaf(m, trainable);
    if (trainable && bindings) bindings->push_back({&m, var});
    return var;
  };
  v.item_emb = reg(params.item_emb);
  v.pos_emb = reg(params.pos_emb);
  for (auto& b : params.blocks)
    v.blocks.push_back(register_block(tape, b, trainable, bindings));
  return v;
}

ad::Var embed_on_tape(ad::Tape& tape, const BackboneVars& vars,
                      const BackboneParams& params, const std::vector<int>& ids) {
  check_ids(ids, params);
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
  ad::Var e = tape.add(tape.gather_rows(vars.item_emb, ids),
                       tape.gather_rows(vars.pos_emb, positions));
  return tape.dropout(e, params.cfg.dropout);
}

ad::Var encode_on_tape(ad::Tape& tape, const BackboneVars& vars,
                       const BackboneParams& params, const std::vector<int>& ids) {
  ad::Var x = embed_on_tape(tape, vars, params, ids);
  for (const auto& block : vars.blocks)
    x = apply_block(tape, x, block, params.cfg.heads, /*causal=*/true,
                    params.cfg.dropout);
  return x;
}

ad::Mat embed_sequence(const std::vector<int>& prefix,
                       const BackboneParams& params) {
  ad::Tape tape;  // eval mode: no dropout
  BackboneVars vars =
      register_backbone(tape, const_cast<BackboneParams&>(params), false, nullptr);
  return embed_on_tape(tape, vars, params, prefix).value();
}

EncoderOutput encode_sequence(const std::vector<int>& prefix,
                              const BackboneParams& params) {
  ad::Tape tape;
  BackboneVars vars =
      register_backbone(tape, const_cast<BackboneParams&>(params), false, nullptr);
  ad::Var h = encode_on_tape(tape, vars, params, prefix);
  EncoderOutput out;
  out.hidden = h.value();
  out.repr = out.hidden.row(out.hidden.rows() - 1);
  return out;
}

double score_next(const Eigen::RowVectorXd& seq_repr, int item_id,
                  const BackboneParams& params) {
  if (item_id < 0 || item_id >= params.vocab_size)
    throw std::out_of_range("score_next: item id out of range");
  return seq_repr.dot(params.item_emb.row(item_id));
}

ad::Var sequence_bce_on_tape(ad::Tape& tape, const BackboneVars& vars,
                             const BackboneParams& params,
                             const std::vector<int>& input_ids,
                             const std::vector<int>& positives,
                             const std::vector<int>& negatives) {
  if (positives.size() != input_ids.size() || negatives.size() != input_ids.size())
    throw std::invalid_argument("sequence_bce_on_tape: length mismatch");
  ad::Var h = encode_on_tape(tape, vars, params, input_ids);
  ad::Var pos = tape.gather_rows(vars.item_emb, positives);
  ad::Var neg = tape.gather_rows(vars.item_emb, negatives);
  ad::Var pos_logits = tape.rowwise_sum(tape.hadamard(h, pos));
  ad::Var neg_logits = tape.rowwise_sum(tape.hadamard(h, neg));
  // -log sigma(pos) - log(1 - sigma(neg)) == softplus(-pos) + softplus(neg)
  ad::Var loss = tape.add(tape.sum(tape.softplus(tape.scale(pos_logits, -1.0))),
                          tape.sum(tape.softplus(neg_logits)));
  return loss;
}

double backbone_hr_at_k(const BackboneParams& params, const DomainVocab& vocab,
                        const std::vector<SequenceExample>& examples, int k) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    EncoderOutput out = encode_sequence(ex.prefix, params);
    int base = vocab.base(ex.domain);
    int count = vocab.count(ex.domain);
    Eigen::VectorXd scores =
        params.item_emb.middleRows(base, count) * out.repr.transpose();
    double label_score = scores(ex.label - base);
    int rank = 1;
    for (int i = 0; i < count; ++i) {
      if (scores(i) > label_score ||
          (scores(i) == label_score && base + i < ex.label))
        ++rank;
    }
    if (rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

namespace {

PretrainResult pretrain_impl(std::vector<const SequenceExample*> pool,
                             std::vector<SequenceExample> val,
                             const DomainVocab& vocab,
                             const BackboneConfig& cfg,
                             const PretrainConfig& train_cfg) {
  PretrainResult result;
  result.params = init_backbone(cfg, vocab.total(), train_cfg.seed);
  BackboneParams& params = result.params;

  std::mt19937_64 rng(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  double best_hr = -1.0;
  int bad_evals = 0;
  BackboneParams best = params;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < pool.size();
         start += static_cast<std::size_t>(train_cfg.batch_size)) {
      std::size_t end = std::min(
          pool.size(), start + static_cast<std::size_t>(train_cfg.batch_size));
      ad::Tape tape;
      tape.training = true;
      tape.rng = &rng;
      std::vector<ParamBinding> bindings;
      BackboneVars vars = register_backbone(tape, params, true, &bindings);
      std::vector<ad::Var> losses;
      std::size_t steps = 0;
      for (std::size_t i = start; i < end; ++i) {
        const SequenceExample& ex = *pool[i];
        std::vector<int> full = ex.prefix;
        full.push_back(ex.label);
        if (static_cast<int>(full.size()) > params.cfg.max_len)
          full.erase(full.begin(),
                     full.end() - params.cfg.max_len);
        std::vector<int> input(full.begin(), full.end() - 1);
        std::vector<int> positives(full.begin() + 1, full.end());
        std::unordered_set<int> seen(full.begin(), full.end());
        std::uniform_int_distribution<int> item_dist(
            vocab.base(ex.domain), vocab.base(ex.domain) + vocab.count(ex.domain) - 1);
        std::vector<int> negatives;
        negatives.reserve(positives.size());
        for (std::size_t t = 0; t < positives.size(); ++t) {
          int j = item_dist(rng);
          // resample until the negative falls outside the user's sequence
          for (int tries = 0; seen.count(j) && tries < 100; ++tries)
            j = item_dist(rng);
          negatives.push_back(j);
        }
        losses.push_back(
            sequence_bce_on_tape(tape, vars, params, input, positives, negatives));
        steps += positives.size();
      }
      ad::Var total = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i)
        total = tape.add(total, losses[i]);
      ad::Var loss = tape.scale(total, 1.0 / static_cast<double>(steps));
      double loss_val = loss.value()(0, 0);
      if (!std::isfinite(loss_val))
        throw std::runtime_error("pretrain_joint: loss diverged (non-finite)");
      tape.backward(loss);
      for (auto& b : bindings) *b.storage -= train_cfg.learning_rate * b.var.grad();
      epoch_loss += loss_val * static_cast<double>(steps);
      epoch_steps += steps;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(epoch_steps));

    if (train_cfg.early_stop && !val.empty() &&
        (epoch + 1) % train_cfg.eval_every == 0) {
      double hr = backbone_hr_at_k(params, vocab, val, 10);
      if (hr > best_hr) {
        best_hr = hr;
        best = params;
        bad_evals = 0;
      } else if (++bad_evals >= train_cfg.patience) {
        params = best;
        break;
      }
    }
  }
  if (train_cfg.early_stop && best_hr >= 0.0) {
    double hr = backbone_hr_at_k(params, vocab, val, 10);
    if (best_hr > hr) params = best;
  }

  params.frozen = true;
  result.checksum = backbone_checksum(params);
  return result;
}

}  // namespace

PretrainResult pretrain_joint(const DomainSplit& split_a,
                              const DomainSplit& split_b,
                              const DomainVocab& vocab,
                              const BackboneConfig& cfg,
                              const PretrainConfig& train_cfg) {
  if (split_a.train.empty() || split_b.train.empty())
    throw std::invalid_argument(
        "pretrain_joint: both train splits must be non-empty");
  // Mixed mini-batches over both domains in one unified feature space.
  std::vector<const SequenceExample*> pool;
  for (const auto& ex : split_a.train) pool.push_back(&ex);
  for (const auto& ex : split_b.train) pool.push_back(&ex);
  std::vector<SequenceExample> val;
  val.insert(val.end(), split_a.validation.begin(), split_a.validation.end());
  val.insert(val.end(), split_b.validation.begin(), split_b.validation.end());
  return pretrain_impl(std::move(pool), std::move(val), vocab, cfg, train_cfg);
}

PretrainResult pretrain_single(const DomainSplit& split, const DomainVocab& vocab,
                               const BackboneConfig& cfg,
                               const PretrainConfig& train_cfg) {
  if (split.train.empty())
    throw std::invalid_argument("pretrain_single: train split must be non-empty");
  std::vector<const SequenceExample*> pool;
  for (const auto& ex : split.train) pool.push_back(&ex);
  return pretrain_impl(std::move(pool), split.validation, vocab, cfg, train_cfg);
}

}  // namespace plcr
