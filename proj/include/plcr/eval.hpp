#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "plcr/prompt.hpp"
#include "plcr/types.hpp"

namespace plcr {

enum class Variant {
  full,
  no_specific,
  no_independent,
  no_separation,
  no_attention,
  single_backbone,
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct DomainMetrics {
  double hr10 = 0.0, hr20 = 0.0, ndcg10 = 0.0, ndcg20 = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  DomainMetrics a;
  DomainMetrics b;
  std::string variant = "full";
  std::string config_fingerprint;
  std::uint64_t seed = 0;

  const DomainMetrics& metrics(Domain d) const { return d == Domain::A ? a : b; }
};

// 1-based rank of local_label under descending score, ties broken by
// ascending id.
int rank_of_label(const Eigen::VectorXd& scores, int local_label);

// Domain item ids (global internal ids) sorted by <g(t_k), f(S)> descending,
// ties by ascending id.
std::vector<int> rank_items(const SequenceExample& seq, Domain domain,
                            const PlcrModel& model);

int hr_at_k(int rank_of_label, int k);
double ndcg_at_k(int rank_of_label, int k);

// Full-ranking evaluation over per-domain example lists. model_a and model_b
// normally refer to the same model; they differ for the single-backbone
// variant.
MetricsReport evaluate(const std::vector<SequenceExample>& examples_a,
                       const std::vector<SequenceExample>& examples_b,
                       const PlcrModel& model_a, const PlcrModel& model_b,
                       Variant variant, const std::string& fingerprint,
                       std::uint64_t seed);
MetricsReport evaluate(const std::vector<SequenceExample>& examples_a,
                       const std::vector<SequenceExample>& examples_b,
                       const PlcrModel& model, Variant variant,
                       const std::string& fingerprint, std::uint64_t seed);

// Applies a prompt-level ablation to a freshly initialized copy of the
// model's prompt state. single_backbone cannot be derived from one model and
// is handled by the experiment driver; passing it here is an error.
PlcrModel build_variant(Variant tag, const PlcrModel& base, std::uint64_t seed);

// Table-2-style human-readable table (percent, 2 decimals).
void write_report_table(std::ostream& out, const MetricsReport& report);
// Machine-readable rows: dataset,domain,variant,metric,K,value,seed
void write_report_csv(std::ostream& out, const MetricsReport& report,
                      const std::string& dataset, bool header);

}  // namespace plcr
