#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "plcr/eval.hpp"

using namespace plcr;

namespace {

DomainVocab tiny_vocab(int count_a, int count_b) {
  DomainVocab vocab;
  vocab.count_a = count_a;
  vocab.count_b = count_b;
  for (int i = 0; i < count_a; ++i) {
    vocab.to_internal_a["a" + std::to_string(i)] = i;
    vocab.to_external.push_back("a" + std::to_string(i));
  }
  for (int i = 0; i < count_b; ++i) {
    vocab.to_internal_b["b" + std::to_string(i)] = count_a + i;
    vocab.to_external.push_back("b" + std::to_string(i));
  }
  return vocab;
}

PlcrModel tiny_model(std::uint64_t seed = 3) {
  BackboneConfig cfg;
  cfg.dim = 6;
  cfg.max_len = 8;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  auto backbone = init_backbone(cfg, 12, seed);
  backbone.frozen = true;
  PromptEncoderConfig enc;
  enc.blocks = 1;
  enc.dropout = 0.0;
  return init_model(std::move(backbone), tiny_vocab(6, 6), 2, 2,
                    PromptLayout::label_end, enc, seed);
}

std::vector<SequenceExample> examples_for(const PlcrModel& model, Domain d,
                                          int n) {
  std::vector<SequenceExample> out;
  int base = model.vocab.base(d);
  int count = model.vocab.count(d);
  for (int u = 0; u < n; ++u) {
    SequenceExample ex;
    ex.domain = d;
    ex.prefix = {base + u % count, base + (u + 1) % count};
    ex.label = base + (u + 2) % count;
    out.push_back(ex);
  }
  return out;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (auto v : {Variant::full, Variant::no_specific, Variant::no_independent,
                 Variant::no_separation, Variant::no_attention,
                 Variant::single_backbone})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS(variant_from_name("no_such_variant"));
}

TEST_CASE("rank_of_label is 1-based with ascending-id tie break") {
  Eigen::VectorXd s(5);
  s << 0.3, 0.9, 0.3, 0.1, 0.9;
  CHECK(rank_of_label(s, 1) == 1);  // ties with id 4, lower id wins
  CHECK(rank_of_label(s, 4) == 2);
  CHECK(rank_of_label(s, 0) == 3);
  CHECK(rank_of_label(s, 2) == 4);
  CHECK(rank_of_label(s, 3) == 5);
}

TEST_CASE("hr and ndcg match the closed forms") {
  CHECK(hr_at_k(1, 10) == 1);
  CHECK(hr_at_k(10, 10) == 1);
  CHECK(hr_at_k(11, 10) == 0);
  CHECK(ndcg_at_k(1, 10) == doctest::Approx(1.0).epsilon(1e-15));
  // rank 3: 1 / log2(4) = 0.5 exactly
  CHECK(ndcg_at_k(3, 10) == 0.5);
  CHECK(ndcg_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(2, 1) == 0.0);
}

TEST_CASE("hr/ndcg agree with a brute-force oracle on random pairs") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> rank_dist(1, 50), k_dist(1, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    int rank = rank_dist(rng);
    int k = k_dist(rng);
    int hr = rank <= k ? 1 : 0;
    double ndcg = rank <= k ? 1.0 / std::log2(rank + 1.0) : 0.0;
    CHECK(hr_at_k(rank, k) == hr);
    CHECK(ndcg_at_k(rank, k) == ndcg);
  }
}

TEST_CASE("ndcg is monotone in rank and bounded by hr") {
  for (int k : {5, 10, 20}) {
    double prev = 2.0;
    for (int rank = 1; rank <= 30; ++rank) {
      double n = ndcg_at_k(rank, k);
      CHECK(n <= prev);
      CHECK(n <= hr_at_k(rank, k));
      CHECK(n >= 0.0);
      prev = n;
    }
  }
}

TEST_CASE("rank_items orders the domain by prompt-sequence score") {
  auto model = tiny_model();
  SequenceExample ex;
  ex.domain = Domain::B;
  ex.prefix = {6, 7};
  ex.label = 8;
  auto ranked = rank_items(ex, Domain::B, model);
  REQUIRE(ranked.size() == 6);
  // recompute scores by hand
  auto out = encode_sequence(ex.prefix, model.backbone);
  ad::Mat z = all_prompt_vectors(Domain::B, model);
  Eigen::VectorXd scores = z * out.repr.transpose();
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    double prev = scores(model.vocab.local_index(ranked[i - 1], Domain::B));
    double cur = scores(model.vocab.local_index(ranked[i], Domain::B));
    CHECK((prev > cur || (prev == cur && ranked[i - 1] < ranked[i])));
  }
}

TEST_CASE("evaluate aggregates per-domain means") {
  auto model = tiny_model();
  auto ex_a = examples_for(model, Domain::A, 8);
  auto ex_b = examples_for(model, Domain::B, 5);
  auto report = evaluate(ex_a, ex_b, model, Variant::full, "fp", 9);
  CHECK(report.a.count == 8);
  CHECK(report.b.count == 5);
  CHECK(report.variant == "full");
  CHECK(report.seed == 9);
  for (const auto* m : {&report.a, &report.b}) {
    CHECK(m->hr10 >= 0.0);
    CHECK(m->hr10 <= 1.0);
    CHECK(m->ndcg10 <= m->hr10 + 1e-12);
    CHECK(m->hr20 >= m->hr10);
    CHECK(m->ndcg20 >= m->ndcg10);
  }
  // brute-force HR@10 for domain A
  double hits = 0;
  for (const auto& ex : ex_a) {
    auto ranked = rank_items(ex, Domain::A, model);
    for (int i = 0; i < 10 && i < static_cast<int>(ranked.size()); ++i)
      if (ranked[static_cast<std::size_t>(i)] == ex.label) ++hits;
  }
  CHECK(report.a.hr10 == doctest::Approx(hits / 8.0));
  // one empty domain is fine (single-domain evaluation); both empty is not
  auto partial = evaluate({}, ex_b, model, Variant::full, "fp", 9);
  CHECK(partial.a.count == 0);
  CHECK(partial.a.hr10 == 0.0);
  CHECK_THROWS(evaluate({}, {}, model, Variant::full, "fp", 9));
}

TEST_CASE("build_variant applies the prompt ablations") {
  auto base = tiny_model();
  auto no_spec = build_variant(Variant::no_specific, base, 5);
  CHECK(no_spec.prompts.m2 == 0);
  CHECK(no_spec.prompts.m1 == base.prompts.m1);
  auto no_ind = build_variant(Variant::no_independent, base, 5);
  CHECK(no_ind.prompts.m1 == 0);
  CHECK(no_ind.prompts.m2 == base.prompts.m2);
  auto no_sep = build_variant(Variant::no_separation, base, 5);
  CHECK(no_sep.prompts.separate_shared);
  auto no_att = build_variant(Variant::no_attention, base, 5);
  CHECK(!no_att.enc_cfg.attention_aggregation);
  auto full = build_variant(Variant::full, base, 5);
  CHECK(full.prompts.m1 == base.prompts.m1);
  CHECK_THROWS(build_variant(Variant::single_backbone, base, 5));
  // ablations share the identical frozen backbone
  CHECK(no_spec.backbone_checksum == base.backbone_checksum);
}

TEST_CASE("report writers emit the expected fields") {
  MetricsReport report;
  report.a = {0.1234, 0.25, 0.0617, 0.125, 100};
  report.b = {0.5, 0.75, 0.25, 0.375, 50};
  report.variant = "no_attention";
  report.config_fingerprint = "deadbeef";
  report.seed = 42;
  std::ostringstream table;
  write_report_table(table, report);
  auto t = table.str();
  CHECK(t.find("12.34") != std::string::npos);  // percent with 2 decimals
  CHECK(t.find("50.00") != std::string::npos);
  CHECK(t.find("no_attention") != std::string::npos);
  std::ostringstream csv;
  write_report_csv(csv, report, "synthetic", true);
  auto c = csv.str();
  CHECK(c.find("dataset,domain,variant,metric,K,value,seed") !=
        std::string::npos);
  CHECK(c.find("synthetic,A,no_attention,HR,10,") != std::string::npos);
  CHECK(c.find("synthetic,B,no_attention,NDCG,20,") != std::string::npos);
  CHECK(c.find("0.25") != std::string::npos);
}
