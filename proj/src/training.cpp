#include "plcr/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "plcr/checksum.hpp"
#include "plcr/eval.hpp"

namespace plcr {

const char* schedule_name(Schedule s) {
  return s == Schedule::sequential_two_stage ? "sequential" : "interleaved";
}

Schedule schedule_from_name(const std::string& name) {
  if (name == "sequential") return Schedule::sequential_two_stage;
  if (name == "interleaved") return Schedule::epoch_interleaved;
  throw std::invalid_argument("unknown schedule: " + name);
}

Eigen::VectorXd match_distribution(const SequenceExample& seq, Domain domain,
                                   const PlcrModel& model, double temperature) {
  ad::Mat z = all_prompt_vectors(domain, model);
  EncoderOutput enc = encode_sequence(seq.prefix, model.backbone);
  Eigen::VectorXd logits = z * enc.repr.transpose() / temperature;
  if (!logits.allFinite())
    throw std::runtime_error("match_distribution: non-finite logits");
  double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  p /= p.sum();
  return p;
}

double domain_loss(const std::vector<SequenceExample>& batch, Domain domain,
                   const PlcrModel& model, double temperature) {
  if (batch.empty()) throw std::invalid_argument("domain_loss: empty batch");
  ad::Mat z = all_prompt_vectors(domain, model);
  double total = 0.0;
  for (const auto& ex : batch) {
    if (!model.vocab.in_domain(ex.label, domain))
      throw std::out_of_range("domain_loss: label outside domain");
    EncoderOutput enc = encode_sequence(ex.prefix, model.backbone);
    Eigen::VectorXd logits = z * enc.repr.transpose() / temperature;
    double m = logits.maxCoeff();
    double lse = std::log((logits.array() - m).exp().sum()) + m;
    total += lse - logits(model.vocab.local_index(ex.label, domain));
  }
  return total / static_cast<double>(batch.size());
}

namespace {

// f(S) is frozen during prompt learning, so sequence representations are
// computed once up front.
ad::Mat precompute_reprs(const std::vector<SequenceExample>& examples,
                         const BackboneParams& backbone) {
  ad::Mat f(backbone.cfg.dim, static_cast<Eigen::Index>(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i)
    f.col(static_cast<Eigen::Index>(i)) =
        encode_sequence(examples[i].prefix, backbone).repr.transpose();
  return f;
}

struct PhaseData {
  const std::vector<SequenceExample>* examples = nullptr;
  ad::Mat reprs;  // dim x n
  std::vector<int> local_labels;
};

void run_phase(const TrainConfig& cfg, PlcrModel& model, Domain domain,
               const PhaseData& data, int epoch, std::mt19937_64& rng,
               std::vector<LossRecord>& records) {
  std::size_t n = data.examples->size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  int n_items = model.vocab.count(domain);
  double phase_loss = 0.0;
  double phase_gnorm = 0.0;
  std::size_t batches = 0;

  for (std::size_t start = 0; start < n;
       start += static_cast<std::size_t>(cfg.batch_size)) {
    std::size_t end =
        std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
    std::size_t bsize = end - start;

    ad::Tape tape;
    tape.training = true;
    tape.rng = &rng;
    std::vector<ParamBinding> bindings;
    PromptPhaseVars vars =
        register_prompt_phase(tape, model, domain, true, &bindings);

    // Prompt vectors for the whole domain vocabulary (Eq. 12's denominator).
    std::vector<ad::Var> zs;
    zs.reserve(static_cast<std::size_t>(n_items));
    for (int k = 0; k < n_items; ++k)
      zs.push_back(prompt_vector_on_tape(tape, vars, model, domain, k));
    ad::Var z_all = tape.stack_rows(zs);  // n_items x dim

    ad::Mat f_batch(model.backbone.cfg.dim, static_cast<Eigen::Index>(bsize));
    std::vector<int> labels(bsize);
    for (std::size_t i = 0; i < bsize; ++i) {
      f_batch.col(static_cast<Eigen::Index>(i)) =
          data.reprs.col(static_cast<Eigen::Index>(order[start + i]));
      labels[i] = data.local_labels[order[start + i]];
    }

    ad::Var logits = tape.matmul(z_all, tape.constant(f_batch));
    if (cfg.temperature != 1.0)
      logits = tape.scale(logits, 1.0 / cfg.temperature);
    ad::Var loss = tape.cross_entropy_cols(logits, labels);
    double loss_val = loss.value()(0, 0);
    if (!std::isfinite(loss_val)) {
      LossRecord rec{epoch, domain, loss_val, 0.0};
      records.push_back(rec);
      throw std::runtime_error("train_prompts: non-finite loss in phase " +
                               std::string(domain_name(domain)) + " epoch " +
                               std::to_string(epoch));
    }
    tape.backward(loss);

    double gsq = 0.0;
    for (auto& b : bindings) gsq += b.var.grad().squaredNorm();
    for (auto& b : bindings) *b.storage -= cfg.learning_rate * b.var.grad();

    phase_loss += loss_val;
    phase_gnorm += std::sqrt(gsq);
    ++batches;
  }
  records.push_back(LossRecord{epoch, domain,
                               phase_loss / static_cast<double>(batches),
                               phase_gnorm / static_cast<double>(batches)});
}

double val_hr10_sum(const PlcrModel& model_a, const PlcrModel& model_b,
                    const DatasetSplit& data) {
  double sum = 0.0;
  for (Domain d : {Domain::A, Domain::B}) {
    const PlcrModel& model = d == Domain::A ? model_a : model_b;
    const auto& val = domain_split(data, d).validation;
    if (val.empty()) continue;
    ad::Mat z = all_prompt_vectors(d, model);
    std::size_t hits = 0;
    for (const auto& ex : val) {
      EncoderOutput enc = encode_sequence(ex.prefix, model.backbone);
      Eigen::VectorXd scores = z * enc.repr.transpose();
      if (rank_of_label(scores, model.vocab.local_index(ex.label, d)) <= 10)
        ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(val.size());
  }
  return sum;
}

struct PromptSnapshot {
  PromptSet prompts_a, prompts_b;
  PromptEncoderParams enc_a, enc_b;
};

PromptSnapshot snapshot(const PlcrModel& a, const PlcrModel& b) {
  return {a.prompts, b.prompts, a.encoder_a, b.encoder_b};
}

void restore(PlcrModel& a, PlcrModel& b, const PromptSnapshot& s) {
  a.prompts = s.prompts_a;
  b.prompts = s.prompts_b;
  a.encoder_a = s.enc_a;
  b.encoder_b = s.enc_b;
}

}  // namespace

TrainResult train_prompts(const TrainConfig& cfg, const DatasetSplit& data,
                          PlcrModel& model) {
  return train_prompts(cfg, data, model, model);
}

TrainResult train_prompts(const TrainConfig& cfg, const DatasetSplit& data,
                          PlcrModel& model_a, PlcrModel& model_b) {
  if (!model_a.backbone.frozen || !model_b.backbone.frozen)
    throw std::logic_error("train_prompts: backbone must be frozen first");
  if (data.a.train.empty() || data.b.train.empty())
    throw std::invalid_argument("train_prompts: both train splits required");

  const bool two_models = &model_a != &model_b;
  // Shared [v] must be bitwise identical from both domains' viewpoints.
  auto sync_shared_to = [&](PlcrModel& from, PlcrModel& to) {
    if (two_models && !from.prompts.separate_shared)
      to.prompts.shared = from.prompts.shared;
  };

  PhaseData pa, pb;
  pa.examples = &data.a.train;
  pa.reprs = precompute_reprs(data.a.train, model_a.backbone);
  pb.examples = &data.b.train;
  pb.reprs = precompute_reprs(data.b.train, model_b.backbone);
  for (const auto& ex : data.a.train)
    pa.local_labels.push_back(model_a.vocab.local_index(ex.label, Domain::A));
  for (const auto& ex : data.b.train)
    pb.local_labels.push_back(model_b.vocab.local_index(ex.label, Domain::B));

  std::mt19937_64 rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  TrainResult result;
  double best = -1.0;
  PromptSnapshot best_snap = snapshot(model_a, model_b);

  auto maybe_select = [&](int epoch) {
    if (!cfg.select_best) return;
    if ((epoch + 1) % cfg.eval_every != 0 && epoch + 1 != cfg.epochs) return;
    double hr = val_hr10_sum(model_a, model_b, data);
    if (hr > best) {
      best = hr;
      best_snap = snapshot(model_a, model_b);
    }
  };

  if (cfg.schedule == Schedule::sequential_two_stage) {
    for (int e = 0; e < cfg.epochs; ++e)
      run_phase(cfg, model_a, Domain::A, pa, e, rng, result.records);
    sync_shared_to(model_a, model_b);
    for (int e = 0; e < cfg.epochs; ++e) {
      run_phase(cfg, model_b, Domain::B, pb, e, rng, result.records);
      sync_shared_to(model_b, model_a);
      maybe_select(e);
    }
  } else {
    for (int e = 0; e < cfg.epochs; ++e) {
      run_phase(cfg, model_a, Domain::A, pa, e, rng, result.records);
      sync_shared_to(model_a, model_b);
      run_phase(cfg, model_b, Domain::B, pb, e, rng, result.records);
      sync_shared_to(model_b, model_a);
      maybe_select(e);
    }
  }

  if (cfg.select_best && best >= 0.0) {
    double final_hr = val_hr10_sum(model_a, model_b, data);
    if (best > final_hr) restore(model_a, model_b, best_snap);
    result.best_val_hr10_sum = std::max(best, final_hr);
  }
  return result;
}

std::vector<std::pair<std::string, std::uint64_t>> block_checksums(
    const BackboneParams& params) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  const_cast<BackboneParams&>(params).for_each(
      [&out](const std::string& name, const ad::Mat& m) {
        Fnv1a h;
        h.update(m);
        out.emplace_back(name, h.digest());
      });
  return out;
}

void assert_frozen(
    const std::vector<std::pair<std::string, std::uint64_t>>& before,
    const BackboneParams& params) {
  auto now = block_checksums(params);
  if (now.size() != before.size())
    throw std::runtime_error("assert_frozen: parameter block set changed");
  for (std::size_t i = 0; i < now.size(); ++i)
    if (now[i].second != before[i].second)
      throw std::runtime_error("assert_frozen: block '" + before[i].first +
                               "' changed after freeze");
}

}  // namespace plcr
