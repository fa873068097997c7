#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "plcr/prompt.hpp"

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

PlcrModel tiny_model(int m1 = 2, int m2 = 2,
                     PromptLayout layout = PromptLayout::label_end,
                     std::uint64_t seed = 3) {
  BackboneConfig cfg;
  cfg.dim = 6;
  cfg.max_len = 8;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  auto backbone = init_backbone(cfg, 10, seed);
  backbone.frozen = true;
  PromptEncoderConfig enc;
  enc.blocks = 1;
  enc.dropout = 0.0;
  return init_model(std::move(backbone), tiny_vocab(5, 5), m1, m2, layout, enc,
                    seed);
}

std::vector<std::vector<double>> sorted_rows(const ad::Mat& m) {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (int j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST_CASE("layout names round-trip") {
  for (auto l : {PromptLayout::label_end, PromptLayout::label_middle,
                 PromptLayout::label_front})
    CHECK(layout_from_name(layout_name(l)) == l);
  CHECK_THROWS(layout_from_name("sideways"));
}

TEST_CASE("compose_prompt layouts are row permutations of each other") {
  auto base = tiny_model();
  for (int item = 0; item < 5; ++item) {
    ad::Mat end_m, mid_m, front_m;
    {
      auto m = tiny_model(2, 2, PromptLayout::label_end);
      end_m = compose_prompt(item, Domain::A, m);
    }
    {
      auto m = tiny_model(2, 2, PromptLayout::label_middle);
      mid_m = compose_prompt(item, Domain::A, m);
    }
    {
      auto m = tiny_model(2, 2, PromptLayout::label_front);
      front_m = compose_prompt(item, Domain::A, m);
    }
    CHECK(end_m.rows() == 5);  // m1 + m2 + 1
    CHECK(sorted_rows(end_m) == sorted_rows(mid_m));
    CHECK(sorted_rows(end_m) == sorted_rows(front_m));
  }
}

TEST_CASE("compose_prompt places the label row per layout") {
  for (auto [layout, row] :
       std::vector<std::pair<PromptLayout, int>>{{PromptLayout::label_end, 4},
                                                 {PromptLayout::label_middle, 2},
                                                 {PromptLayout::label_front, 0}}) {
    auto model = tiny_model(2, 2, layout);
    ad::Mat p = compose_prompt(3, Domain::A, model);
    CHECK(p.row(row) == model.backbone.item_emb.row(3));
  }
}

TEST_CASE("compose_prompt uses the domain-B token block and label row") {
  auto model = tiny_model();
  ad::Mat p = compose_prompt(7, Domain::B, model);  // local item 2 of B
  CHECK(p.row(4) == model.backbone.item_emb.row(7));
  CHECK(p.middleRows(2, 2) == model.prompts.domain_b);
  CHECK(p.topRows(2) == model.prompts.shared);
  CHECK_THROWS(compose_prompt(7, Domain::A, model));
  CHECK_THROWS(compose_prompt(2, Domain::B, model));
}

TEST_CASE("encode_prompt maps identical rows to identical rows") {
  PromptEncoderConfig cfg;
  cfg.blocks = 2;
  cfg.dropout = 0.0;
  cfg.use_positional = false;
  auto enc = init_prompt_encoder(cfg, 6, 4, 11);
  ad::Mat prompt(4, 6);
  Eigen::RowVectorXd r = Eigen::RowVectorXd::LinSpaced(6, -1.0, 1.0);
  for (int i = 0; i < 4; ++i) prompt.row(i) = r;
  ad::Mat x = encode_prompt(prompt, enc, cfg);
  for (int i = 1; i < 4; ++i) CHECK(x.row(i).isApprox(x.row(0), 1e-12));
}

TEST_CASE("positional embeddings break the row symmetry") {
  PromptEncoderConfig cfg;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  cfg.use_positional = true;
  auto enc = init_prompt_encoder(cfg, 6, 4, 11);
  ad::Mat prompt = ad::Mat::Zero(4, 6);
  ad::Mat x = encode_prompt(prompt, enc, cfg);
  CHECK(!x.row(0).isApprox(x.row(1), 1e-9));
}

TEST_CASE("aggregation weights sum to one (ones-vector oracle)") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> dist(0.0, 1.0);
  PromptEncoderConfig cfg;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto enc = init_prompt_encoder(cfg, 6, 5, rng());
    // scale up the MLP so scores are far from uniform
    enc.agg_w1 *= 40.0;
    enc.agg_w2 *= 40.0;
    ad::Mat x = ad::Mat::Ones(5, 6);
    Eigen::RowVectorXd label(6);
    for (int j = 0; j < 6; ++j) label(j) = dist(rng);
    // z = gamma * ones-matrix, so every coordinate equals sum(gamma)
    Eigen::RowVectorXd z = aggregate_tokens(x, label, enc, cfg);
    for (int j = 0; j < 6; ++j)
      CHECK(z(j) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("aggregation matches a hand-built softmax (0.25, 0.75)") {
  PromptEncoderConfig cfg;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  cfg.agg_hidden = 1;
  auto enc = init_prompt_encoder(cfg, 2, 2, 1);
  // score_i = ReLU(x_i[0]); tokens score (0, ln 3) -> gamma = (0.25, 0.75)
  enc.agg_w1 = ad::Mat::Zero(4, 1);
  enc.agg_w1(2, 0) = 1.0;
  enc.agg_b1 = ad::Mat::Zero(1, 1);
  enc.agg_w2 = ad::Mat::Ones(1, 1);
  enc.agg_b2 = ad::Mat::Zero(1, 1);
  ad::Mat x(2, 2);
  x << 0.0, 4.0, std::log(3.0), -2.0;
  Eigen::RowVectorXd label = Eigen::RowVectorXd::Zero(2);
  Eigen::RowVectorXd z = aggregate_tokens(x, label, enc, cfg);
  Eigen::RowVectorXd expect = 0.25 * x.row(0) + 0.75 * x.row(1);
  CHECK(z.isApprox(expect, 1e-12));
}

TEST_CASE("no-attention aggregation is the uniform mean") {
  PromptEncoderConfig cfg;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  cfg.attention_aggregation = false;
  auto enc = init_prompt_encoder(cfg, 3, 4, 2);
  ad::Mat x(4, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  Eigen::RowVectorXd label = Eigen::RowVectorXd::Ones(3);
  Eigen::RowVectorXd z = aggregate_tokens(x, label, enc, cfg);
  CHECK(z.isApprox(x.colwise().mean(), 1e-12));
  // and it ignores the label entirely
  Eigen::RowVectorXd z2 = aggregate_tokens(x, 5.0 * label, enc, cfg);
  CHECK(z == z2);
}

TEST_CASE("label guidance makes aggregation label-sensitive") {
  PromptEncoderConfig cfg;
  cfg.blocks = 1;
  cfg.dropout = 0.0;
  auto enc = init_prompt_encoder(cfg, 6, 5, 9);
  enc.agg_w1 *= 30.0;  // make the MLP react visibly to its inputs
  std::mt19937_64 rng(31);
  std::normal_distribution<double> dist(0.0, 1.0);
  ad::Mat x(5, 6);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
  Eigen::RowVectorXd l1(6), l2(6);
  for (int j = 0; j < 6; ++j) {
    l1(j) = dist(rng);
    l2(j) = dist(rng);
  }
  Eigen::RowVectorXd z1 = aggregate_tokens(x, l1, enc, cfg);
  Eigen::RowVectorXd z2 = aggregate_tokens(x, l2, enc, cfg);
  CHECK(!z1.isApprox(z2, 1e-9));
}

TEST_CASE("prompt_vector is deterministic and domain-checked") {
  auto model = tiny_model();
  auto v1 = prompt_vector(2, Domain::A, model);
  auto v2 = prompt_vector(2, Domain::A, model);
  CHECK(v1 == v2);
  CHECK(v1.size() == 6);
  CHECK_THROWS(prompt_vector(8, Domain::A, model));
}

TEST_CASE("all_prompt_vectors stacks per-item g(.) rows") {
  auto model = tiny_model();
  ad::Mat za = all_prompt_vectors(Domain::A, model);
  REQUIRE(za.rows() == 5);
  for (int i = 0; i < 5; ++i)
    CHECK(za.row(i).isApprox(prompt_vector(i, Domain::A, model).transpose().transpose(), 1e-12));
  ad::Mat zb = all_prompt_vectors(Domain::B, model);
  CHECK(zb.row(0).isApprox(prompt_vector(5, Domain::B, model).transpose().transpose(), 1e-12));
}

TEST_CASE("prompt gradients match finite differences through g(.)") {
  auto model = tiny_model(2, 2);
  const int local_item = 1;

  auto eval = [&]() {
    ad::Tape t;
    auto vars = register_prompt_phase(t, model, Domain::A, false, nullptr);
    ad::Var z = prompt_vector_on_tape(t, vars, model, Domain::A, local_item);
    return t.sum(t.sigmoid(z)).value()(0, 0);
  };

  ad::Tape tape;
  std::vector<ParamBinding> bindings;
  auto vars = register_prompt_phase(tape, model, Domain::A, true, &bindings);
  ad::Var z = prompt_vector_on_tape(tape, vars, model, Domain::A, local_item);
  ad::Var out = tape.sum(tape.sigmoid(z));
  tape.backward(out);

  const double h = 1e-6;
  for (auto& b : bindings) {
    for (int i = 0; i < b.storage->rows(); ++i) {
      for (int j = 0; j < b.storage->cols(); ++j) {
        double keep = (*b.storage)(i, j);
        (*b.storage)(i, j) = keep + h;
        double fp = eval();
        (*b.storage)(i, j) = keep - h;
        double fm = eval();
        (*b.storage)(i, j) = keep;
        double fd = (fp - fm) / (2 * h);
        double an = b.var.grad()(i, j);
        double denom = std::max({std::abs(fd), std::abs(an), 1.0});
        CHECK(std::abs(fd - an) / denom < 1e-4);
      }
    }
  }
}

TEST_CASE("frozen item table receives zero gradient in the prompt phase") {
  auto model = tiny_model();
  ad::Tape tape;
  std::vector<ParamBinding> bindings;
  auto vars = register_prompt_phase(tape, model, Domain::A, true, &bindings);
  ad::Var z = prompt_vector_on_tape(tape, vars, model, Domain::A, 0);
  tape.backward(tape.sum(z));
  CHECK((vars.item_table.grad().array() == 0.0).all());
  for (const auto& b : bindings) CHECK(b.storage != &model.backbone.item_emb);
}

TEST_CASE("init_prompt_set rejects empty context and honors separation") {
  CHECK_THROWS(init_prompt_set(0, 0, 4, PromptLayout::label_end, 1));
  auto p = init_prompt_set(3, 2, 4, PromptLayout::label_end, 1, true);
  CHECK(p.separate_shared);
  CHECK(p.shared_b == p.shared);  // starts as a copy
  CHECK(&p.shared_view(Domain::B) == &p.shared_b);
  CHECK(&p.shared_view(Domain::A) == &p.shared);
  auto q = init_prompt_set(3, 2, 4, PromptLayout::label_end, 1, false);
  CHECK(&q.shared_view(Domain::B) == &q.shared);
}
