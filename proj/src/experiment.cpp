#include "plcr/experiment.hpp"

#include <stdexcept>

namespace plcr {

Config experiment_config_defaults() {
  Config c;
  c.set("seed", "1");
  c.set("corpus.kcore", "5");
  c.set("corpus.single_pass_kcore", "0");
  c.set("corpus.train_ratio", "0.75");
  c.set("corpus.val_ratio", "0.10");
  c.set("corpus.test_ratio", "0.15");
  c.set("corpus.merge_val_into_test", "0");
  c.set("synth.clusters", "4");
  c.set("synth.users", "500");
  c.set("synth.items", "200");
  c.set("synth.min_len", "8");
  c.set("synth.max_len", "20");
  c.set("synth.p_in", "0.8");
  c.set("synth.zipf", "0");
  c.set("backbone.dim", "50");
  c.set("backbone.max_len", "77");
  c.set("backbone.blocks", "2");
  c.set("backbone.heads", "1");
  c.set("backbone.dropout", "0.2");
  c.set("pretrain.learning_rate", "0.05");
  c.set("pretrain.epochs", "200");
  c.set("pretrain.batch_size", "128");
  c.set("pretrain.early_stop", "1");
  c.set("pretrain.eval_every", "5");
  c.set("pretrain.patience", "3");
  c.set("prompt.m1", "5");
  c.set("prompt.m2", "5");
  c.set("prompt.layout", "end");
  c.set("prompt.blocks", "2");
  c.set("prompt.heads", "1");
  c.set("prompt.dropout", "0.2");
  c.set("prompt.agg_hidden", "0");
  c.set("prompt.positional", "1");
  c.set("train.learning_rate", "0.0001");
  c.set("train.batch_size", "128");
  c.set("train.epochs", "200");
  c.set("train.schedule", "interleaved");
  c.set("train.temperature", "1");
  c.set("train.select_best", "1");
  c.set("train.eval_every", "5");
  return c;
}

ExperimentParams params_from_config(const Config& cfg) {
  ExperimentParams p;
  p.backbone.dim = cfg.get_int("backbone.dim", 50);
  p.backbone.max_len = cfg.get_int("backbone.max_len", 77);
  p.backbone.blocks = cfg.get_int("backbone.blocks", 2);
  p.backbone.heads = cfg.get_int("backbone.heads", 1);
  p.backbone.dropout = cfg.get_double("backbone.dropout", 0.2);
  p.pretrain.learning_rate = cfg.get_double("pretrain.learning_rate", 0.05);
  p.pretrain.epochs = cfg.get_int("pretrain.epochs", 200);
  p.pretrain.batch_size = cfg.get_int("pretrain.batch_size", 128);
  p.pretrain.early_stop = cfg.get_bool("pretrain.early_stop", true);
  p.pretrain.eval_every = cfg.get_int("pretrain.eval_every", 5);
  p.pretrain.patience = cfg.get_int("pretrain.patience", 3);
  p.pretrain.seed = cfg.get_u64("seed", 1);
  p.m1 = cfg.get_int("prompt.m1", 5);
  p.m2 = cfg.get_int("prompt.m2", 5);
  p.layout = layout_from_name(cfg.get_str("prompt.layout", "end"));
  p.enc.blocks = cfg.get_int("prompt.blocks", 2);
  p.enc.heads = cfg.get_int("prompt.heads", 1);
  p.enc.dropout = cfg.get_double("prompt.dropout", 0.2);
  p.enc.agg_hidden = cfg.get_int("prompt.agg_hidden", 0);
  p.enc.use_positional = cfg.get_bool("prompt.positional", true);
  p.train.learning_rate = cfg.get_double("train.learning_rate", 1e-4);
  p.train.batch_size = cfg.get_int("train.batch_size", 128);
  p.train.epochs = cfg.get_int("train.epochs", 200);
  p.train.schedule =
      schedule_from_name(cfg.get_str("train.schedule", "interleaved"));
  p.train.temperature = cfg.get_double("train.temperature", 1.0);
  p.train.select_best = cfg.get_bool("train.select_best", true);
  p.train.eval_every = cfg.get_int("train.eval_every", 5);
  p.train.seed = cfg.get_u64("seed", 1);
  return p;
}

VariantRun run_variant_experiment(Variant variant, const Manifest& data,
                                  const BackboneParams& joint_backbone,
                                  const ExperimentParams& params,
                                  std::uint64_t seed,
                                  const std::string& fingerprint) {
  TrainConfig train_cfg = params.train;
  train_cfg.seed = seed;
  VariantRun run;

  if (variant == Variant::single_backbone) {
    PretrainConfig pre = params.pretrain;
    pre.seed = seed;
    PretrainResult bb_a =
        pretrain_single(data.split.a, data.vocab, params.backbone, pre);
    pre.seed = seed ^ 0x5b5b5b5bULL;
    PretrainResult bb_b =
        pretrain_single(data.split.b, data.vocab, params.backbone, pre);
    PlcrModel model_a = init_model(std::move(bb_a.params), data.vocab, params.m1,
                                   params.m2, params.layout, params.enc, seed);
    PlcrModel model_b = init_model(std::move(bb_b.params), data.vocab, params.m1,
                                   params.m2, params.layout, params.enc, seed);
    run.train = train_prompts(train_cfg, data.split, model_a, model_b);
    run.report = evaluate(data.split.a.test, data.split.b.test, model_a, model_b,
                          variant, fingerprint, seed);
    return run;
  }

  if (!joint_backbone.frozen)
    throw std::logic_error("run_variant_experiment: backbone must be frozen");
  PlcrModel model = init_model(joint_backbone, data.vocab, params.m1, params.m2,
                               params.layout, params.enc, seed);
  if (variant != Variant::full) model = build_variant(variant, model, seed);
  run.train = train_prompts(train_cfg, data.split, model);
  run.report = evaluate(data.split.a.test, data.split.b.test, model, variant,
                        fingerprint, seed);
  return run;
}

}  // namespace plcr
