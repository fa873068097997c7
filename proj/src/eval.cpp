#include "plcr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace plcr {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_specific: return "no_specific";
    case Variant::no_independent: return "no_independent";
    case Variant::no_separation: return "no_separation";
    case Variant::no_attention: return "no_attention";
    case Variant::single_backbone: return "single_backbone";
  }
  return "full";
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::full, Variant::no_specific, Variant::no_independent,
                    Variant::no_separation, Variant::no_attention,
                    Variant::single_backbone})
    if (name == variant_name(v)) return v;
  throw std::invalid_argument("unknown variant: " + name);
}

int rank_of_label(const Eigen::VectorXd& scores, int local_label) {
  double label_score = scores(local_label);
  int rank = 1;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > label_score ||
        (scores(i) == label_score && static_cast<int>(i) < local_label))
      ++rank;
  }
  return rank;
}

std::vector<int> rank_items(const SequenceExample& seq, Domain domain,
                            const PlcrModel& model) {
  ad::Mat z = all_prompt_vectors(domain, model);
  EncoderOutput enc = encode_sequence(seq.prefix, model.backbone);
  Eigen::VectorXd scores = z * enc.repr.transpose();
  int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  int base = model.vocab.base(domain);
  for (int& id : order) id += base;
  return order;
}

int hr_at_k(int rank_of_label, int k) { return rank_of_label <= k ? 1 : 0; }

double ndcg_at_k(int rank_of_label, int k) {
  if (rank_of_label > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank_of_label) + 1.0);
}

namespace {

DomainMetrics evaluate_domain(const std::vector<SequenceExample>& examples,
                              Domain domain, const PlcrModel& model) {
  DomainMetrics m;
  m.count = examples.size();
  if (examples.empty()) return m;
  ad::Mat z = all_prompt_vectors(domain, model);
  for (const auto& ex : examples) {
    EncoderOutput enc = encode_sequence(ex.prefix, model.backbone);
    Eigen::VectorXd scores = z * enc.repr.transpose();
    int rank = rank_of_label(scores, model.vocab.local_index(ex.label, domain));
    m.hr10 += hr_at_k(rank, 10);
    m.hr20 += hr_at_k(rank, 20);
    m.ndcg10 += ndcg_at_k(rank, 10);
    m.ndcg20 += ndcg_at_k(rank, 20);
  }
  double n = static_cast<double>(m.count);
  m.hr10 /= n;
  m.hr20 /= n;
  m.ndcg10 /= n;
  m.ndcg20 /= n;
  return m;
}

}  // namespace

MetricsReport evaluate(const std::vector<SequenceExample>& examples_a,
                       const std::vector<SequenceExample>& examples_b,
                       const PlcrModel& model_a, const PlcrModel& model_b,
                       Variant variant, const std::string& fingerprint,
                       std::uint64_t seed) {
  if (examples_a.empty() && examples_b.empty())
    throw std::invalid_argument("evaluate: empty split");
  MetricsReport report;
  report.a = evaluate_domain(examples_a, Domain::A, model_a);
  report.b = evaluate_domain(examples_b, Domain::B, model_b);
  report.variant = variant_name(variant);
  report.config_fingerprint = fingerprint;
  report.seed = seed;
  return report;
}

MetricsReport evaluate(const std::vector<SequenceExample>& examples_a,
                       const std::vector<SequenceExample>& examples_b,
                       const PlcrModel& model, Variant variant,
                       const std::string& fingerprint, std::uint64_t seed) {
  return evaluate(examples_a, examples_b, model, model, variant, fingerprint,
                  seed);
}

PlcrModel build_variant(Variant tag, const PlcrModel& base, std::uint64_t seed) {
  if (tag == Variant::single_backbone)
    throw std::invalid_argument(
        "build_variant: single_backbone needs per-domain pre-training; use the "
        "experiment driver");
  PlcrModel model = base;
  int m1 = base.prompts.m1;
  int m2 = base.prompts.m2;
  bool separate = false;
  switch (tag) {
    case Variant::full:
      return model;
    case Variant::no_specific:
      m2 = 0;
      break;
    case Variant::no_independent:
      m1 = 0;
      break;
    case Variant::no_separation:
      separate = true;
      break;
    case Variant::no_attention:
      model.enc_cfg.attention_aggregation = false;
      return model;
    default:
      break;
  }
  model.prompts = init_prompt_set(m1, m2, model.backbone.cfg.dim,
                                  base.prompts.layout, seed, separate);
  int tokens = model.prompts.tokens();
  model.encoder_a = init_prompt_encoder(model.enc_cfg, model.backbone.cfg.dim,
                                        tokens, seed ^ 0xA);
  model.encoder_b = init_prompt_encoder(model.enc_cfg, model.backbone.cfg.dim,
                                        tokens, seed ^ 0xB);
  return model;
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  out << "Variant: " << report.variant << "  seed: " << report.seed << "\n";
  out << "Domain      HR@10    HR@20   NDCG@10  NDCG@20   #seq\n";
  auto row = [&out](const char* name, const DomainMetrics& m) {
    out << std::left << std::setw(8) << name << std::right << std::fixed
        << std::setprecision(2);
    out << std::setw(8) << m.hr10 * 100.0 << std::setw(9) << m.hr20 * 100.0
        << std::setw(9) << m.ndcg10 * 100.0 << std::setw(9) << m.ndcg20 * 100.0
        << std::setw(7) << m.count << "\n";
  };
  row("A", report.a);
  row("B", report.b);
}

void write_report_csv(std::ostream& out, const MetricsReport& report,
                      const std::string& dataset, bool header) {
  if (header) out << "dataset,domain,variant,metric,K,value,seed,fingerprint\n";
  auto rows = [&](const char* domain, const DomainMetrics& m) {
    auto emit = [&](const char* metric, int k, double v) {
      out << dataset << ',' << domain << ',' << report.variant << ',' << metric
          << ',' << k << ',' << std::setprecision(17) << v << ','
          << report.seed << ',' << report.config_fingerprint << "\n";
    };
    emit("HR", 10, m.hr10);
    emit("HR", 20, m.hr20);
    emit("NDCG", 10, m.ndcg10);
    emit("NDCG", 20, m.ndcg20);
  };
  rows("A", report.a);
  rows("B", report.b);
}

}  // namespace plcr
