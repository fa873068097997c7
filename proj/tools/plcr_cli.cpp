// Command-line experiment runner: every pipeline stage is a subcommand that
// reads the previous stage's artifacts from the output directory and writes
// its own, stamped with the config fingerprint.
//
// Exit codes: 0 success, 1 usage error, 2 missing/invalid artifact,
// 3 numerical failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "plcr/checkpoint.hpp"
#include "plcr/config.hpp"
#include "plcr/corpus.hpp"
#include "plcr/eval.hpp"
#include "plcr/experiment.hpp"
#include "plcr/manifest.hpp"
#include "plcr/synthgen.hpp"
#include "plcr/training.hpp"

namespace fs = std::filesystem;
using namespace plcr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitArtifact = 2;
constexpr int kExitNumerical = 3;

struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string variant;
  std::string schedule;
  std::string layout;
  int m1 = -1;
  double dropout = -1.0;
  std::vector<std::string> overrides;  // key=value
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
  cmd->add_option("--out", opts.out_dir, "artifact directory");
  cmd->add_option("--seed", opts.seed, "run seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--variant", opts.variant,
                  "full|no_specific|no_independent|no_separation|no_attention|"
                  "single_backbone");
  cmd->add_option("--schedule", opts.schedule, "sequential|interleaved");
  cmd->add_option("--layout", opts.layout, "front|middle|end");
  cmd->add_option("--m1", opts.m1, "shared context tokens");
  cmd->add_option("--dropout", opts.dropout, "dropout rate");
  cmd->add_option("--set", opts.overrides, "extra key=value override")
      ->take_all();
}

std::string resolve_out_dir(const CommonOpts& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* root = std::getenv("PLCR_OUT_ROOT")) return root;
  return "plcr_out";
}

Config resolve_config(const CommonOpts& opts) {
  Config cfg = experiment_config_defaults();
  if (!opts.config_path.empty()) {
    if (!fs::exists(opts.config_path))
      throw ArtifactError("missing config file: " + opts.config_path);
    Config file = Config::from_file(opts.config_path);
    for (const auto& [k, v] : file.values()) cfg.set(k, v);
  }
  if (opts.seed_set) cfg.set("seed", std::to_string(opts.seed));
  if (!opts.schedule.empty()) cfg.set("train.schedule", opts.schedule);
  if (!opts.layout.empty()) cfg.set("prompt.layout", opts.layout);
  if (opts.m1 >= 0) cfg.set("prompt.m1", std::to_string(opts.m1));
  if (opts.dropout >= 0.0) {
    std::ostringstream v;
    v << opts.dropout;
    cfg.set("prompt.dropout", v.str());
    cfg.set("backbone.dropout", v.str());
  }
  for (const auto& kv : opts.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string require_artifact(const fs::path& path, const char* what) {
  if (!fs::exists(path))
    throw ArtifactError(std::string(what) + " not found: " + path.string() +
                        " (run the producing stage first)");
  return path.string();
}

Manifest load_manifest(const fs::path& out) {
  return read_manifest(require_artifact(out / "manifest.txt", "split manifest"));
}

BackboneParams load_backbone(const fs::path& out) {
  return backbone_from_checkpoint(
      Checkpoint::load(require_artifact(out / "backbone.ckpt", "backbone checkpoint")));
}

void canonical_sort(InteractionLog& log) {
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const Interaction& x, const Interaction& y) {
                     if (x.user != y.user) return x.user < y.user;
                     return x.timestamp < y.timestamp;
                   });
}

Manifest build_manifest_from_logs(InteractionLog raw_a, InteractionLog raw_b,
                                  const Config& cfg, const fs::path& out) {
  // Generated and re-read logs must produce identical artifacts, so normalize
  // to the same (user, timestamp) order the log reader guarantees.
  canonical_sort(raw_a);
  canonical_sort(raw_b);
  int kcore = cfg.get_int("corpus.kcore", 5);
  bool single_pass = cfg.get_bool("corpus.single_pass_kcore", false);
  auto log_a = kcore_filter(raw_a, kcore, single_pass);
  auto log_b = kcore_filter(raw_b, kcore, single_pass);
  if (log_a.records.empty() || log_b.records.empty())
    throw ArtifactError("k-core filtering removed an entire domain; lower corpus.kcore");

  Manifest m;
  m.vocab = build_vocab(log_a, log_b);
  m.fingerprint = cfg.fingerprint();
  int max_len = cfg.get_int("backbone.max_len", 77);
  auto seq_a = build_sequences(log_a, m.vocab, max_len);
  auto seq_b = build_sequences(log_b, m.vocab, max_len);
  SplitRatios ratios;
  ratios.train = cfg.get_double("corpus.train_ratio", 0.75);
  ratios.validation = cfg.get_double("corpus.val_ratio", 0.10);
  ratios.test = cfg.get_double("corpus.test_ratio", 0.15);
  bool merge = cfg.get_bool("corpus.merge_val_into_test", false);
  std::uint64_t seed = cfg.get_u64("seed", 1);
  m.split.a = split_sequences(std::move(seq_a.examples), ratios, seed, merge);
  m.split.b = split_sequences(std::move(seq_b.examples), ratios, seed ^ 0xB, merge);
  m.split.seed = seed;

  fs::create_directories(out);
  write_manifest((out / "manifest.txt").string(), m);
  std::ofstream stats_out(out / "stats.txt");
  write_stats(stats_out, corpus_stats(log_a, log_b, m.split));
  return m;
}

void write_loss_csv(const fs::path& path, const std::vector<LossRecord>& records) {
  std::ofstream out(path);
  out << "epoch,phase,loss,grad_norm\n";
  for (const auto& r : records)
    out << r.epoch << ',' << domain_name(r.phase) << ',' << r.loss << ','
        << r.grad_norm << "\n";
}

// Minimal static line plot (one polyline per series) for sweep results.
void write_svg_plot(const fs::path& path, const std::string& title,
                    const std::vector<std::string>& x_labels,
                    const std::map<std::string, std::vector<double>>& series) {
  const double w = 640, h = 420, ml = 60, mr = 150, mt = 40, mb = 50;
  double ymin = 0.0, ymax = 1e-9;
  for (const auto& [name, ys] : series)
    for (double y : ys) ymax = std::max(ymax, y);
  ymax *= 1.1;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto sx = [&](std::size_t i) {
    return ml + (x_labels.size() < 2
                     ? pw / 2
                     : pw * static_cast<double>(i) /
                           static_cast<double>(x_labels.size() - 1));
  };
  auto sy = [&](double y) { return mt + ph * (1.0 - (y - ymin) / (ymax - ymin)); };
  const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='"
      << h << "' viewBox='0 0 " << w << " " << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>"
      << title << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw
      << "' y2='" << mt + ph << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << mt + ph << "' stroke='black'/>\n";
  for (std::size_t i = 0; i < x_labels.size(); ++i)
    out << "<text x='" << sx(i) << "' y='" << mt + ph + 20
        << "' text-anchor='middle' font-size='12'>" << x_labels[i]
        << "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double y = ymin + (ymax - ymin) * tick / 4.0;
    out << "<text x='" << ml - 8 << "' y='" << sy(y) + 4
        << "' text-anchor='end' font-size='12'>" << std::fixed
        << std::setprecision(3) << y << "</text>\n";
  }
  int ci = 0;
  for (const auto& [name, ys] : series) {
    const char* color = colors[ci % 8];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (std::size_t i = 0; i < ys.size(); ++i)
      out << sx(i) << ',' << sy(ys[i]) << ' ';
    out << "'/>\n";
    out << "<text x='" << ml + pw + 10 << "' y='" << mt + 16 + 18 * ci
        << "' font-size='12' fill='" << color << "'>" << name << "</text>\n";
    ++ci;
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------- subcommands

int cmd_synth(const CommonOpts& opts) {
  Config cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  SynthConfig sc;
  sc.n_clusters = cfg.get_int("synth.clusters", 4);
  sc.users_per_domain = cfg.get_int("synth.users", 500);
  sc.items_per_domain = cfg.get_int("synth.items", 200);
  sc.min_seq_len = cfg.get_int("synth.min_len", 8);
  sc.max_seq_len = cfg.get_int("synth.max_len", 20);
  sc.p_in = cfg.get_double("synth.p_in", 0.8);
  sc.zipf_exponent = cfg.get_double("synth.zipf", 0.0);
  sc.seed = cfg.get_u64("seed", 1);
  auto [log_a, log_b] = gen_dual_domain(sc);
  fs::create_directories(out);
  write_log_file((out / "log_a.tsv").string(), log_a);
  write_log_file((out / "log_b.tsv").string(), log_b);
  Manifest m = build_manifest_from_logs(log_a, log_b, cfg, out);
  std::cout << "synth: " << log_a.records.size() << " + " << log_b.records.size()
            << " interactions, " << m.vocab.total() << " items, manifest at "
            << (out / "manifest.txt").string() << "\n";
  return 0;
}

int cmd_ingest(const CommonOpts& opts, const std::string& log_a_path,
               const std::string& log_b_path) {
  Config cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  auto raw_a =
      read_log_file(require_artifact(log_a_path, "domain-A log"), Domain::A);
  auto raw_b =
      read_log_file(require_artifact(log_b_path, "domain-B log"), Domain::B);
  if (raw_a.malformed_lines + raw_b.malformed_lines > 0)
    std::cerr << "ingest: skipped " << raw_a.malformed_lines + raw_b.malformed_lines
              << " malformed lines\n";
  Manifest m = build_manifest_from_logs(raw_a, raw_b, cfg, out);
  std::cout << "ingest: " << m.vocab.total() << " items, "
            << m.split.a.train.size() + m.split.b.train.size()
            << " train sequences, manifest at " << (out / "manifest.txt").string()
            << "\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
  Config cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  Manifest data = load_manifest(out);
  ExperimentParams params = params_from_config(cfg);
  auto result = pretrain_joint(data.split.a, data.split.b, data.vocab,
                               params.backbone, params.pretrain);
  auto ckpt = backbone_to_checkpoint(result.params);
  ckpt.meta["fingerprint"] = cfg.fingerprint();
  ckpt.save((out / "backbone.ckpt").string());
  std::ofstream loss_out(out / "pretrain_loss.csv");
  loss_out << "epoch,loss\n";
  for (std::size_t i = 0; i < result.epoch_losses.size(); ++i)
    loss_out << i + 1 << ',' << result.epoch_losses[i] << "\n";
  std::cout << "pretrain: " << result.epoch_losses.size()
            << " epochs, checksum " << std::hex << result.checksum << std::dec
            << ", checkpoint at " << (out / "backbone.ckpt").string() << "\n";
  return 0;
}

int cmd_prompt_train(const CommonOpts& opts) {
  Config cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  std::string variant_tag = opts.variant.empty() ? "full" : opts.variant;
  Variant variant = variant_from_name(variant_tag);
  if (variant == Variant::single_backbone)
    throw ArtifactError(
        "prompt-train covers the shared-backbone variants; run `ablate` for "
        "single_backbone (it pre-trains one backbone per domain)");
  Manifest data = load_manifest(out);
  BackboneParams backbone = load_backbone(out);
  ExperimentParams params = params_from_config(cfg);
  std::uint64_t seed = cfg.get_u64("seed", 1);
  PlcrModel model = init_model(std::move(backbone), data.vocab, params.m1,
                               params.m2, params.layout, params.enc, seed);
  if (variant != Variant::full) model = build_variant(variant, model, seed);
  if (variant == Variant::no_attention)
    model.enc_cfg.attention_aggregation = false;
  TrainConfig train_cfg = params.train;
  train_cfg.seed = seed;
  auto result = train_prompts(train_cfg, data.split, model);
  auto ckpt = prompts_to_checkpoint(model);
  ckpt.meta["fingerprint"] = cfg.fingerprint();
  ckpt.meta["variant"] = variant_tag;
  ckpt.save((out / "prompts.ckpt").string());
  write_loss_csv(out / "train_loss.csv", result.records);
  std::cout << "prompt-train: variant " << variant_tag << ", "
            << result.records.size() << " phase records, best val HR@10 sum "
            << result.best_val_hr10_sum << ", checkpoint at "
            << (out / "prompts.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts) {
  Config cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  Manifest data = load_manifest(out);
  BackboneParams backbone = load_backbone(out);
  auto prompt_ckpt = Checkpoint::load(
      require_artifact(out / "prompts.ckpt", "prompt checkpoint"));
  ExperimentParams params = params_from_config(cfg);
  std::uint64_t seed = cfg.get_u64("seed", 1);
  PlcrModel model = init_model(std::move(backbone), data.vocab, params.m1,
                               params.m2, params.layout, params.enc, seed);
  prompts_from_checkpoint(prompt_ckpt, model);
  std::string variant_tag = prompt_ckpt.meta.count("variant")
                                ? prompt_ckpt.meta.at("variant")
                                : "full";
  auto report = evaluate(data.split.a.test, data.split.b.test, model,
                         variant_from_name(variant_tag), cfg.fingerprint(), seed);
  {
    std::ofstream table(out / "report.txt");
    write_report_table(table, report);
  }
  {
    std::ofstream csv(out / "report.csv");
    write_report_csv(csv, report, "run", true);
  }
  write_report_table(std::cout, report);
  return 0;
}

int cmd_ablate(const CommonOpts& opts) {
  Config cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  Manifest data = load_manifest(out);
  BackboneParams backbone = load_backbone(out);
  ExperimentParams params = params_from_config(cfg);
  std::uint64_t seed = cfg.get_u64("seed", 1);
  std::ofstream csv(out / "ablation.csv");
  bool header = true;
  for (Variant v : {Variant::full, Variant::no_specific, Variant::no_independent,
                    Variant::no_separation, Variant::no_attention,
                    Variant::single_backbone}) {
    auto run =
        run_variant_experiment(v, data, backbone, params, seed, cfg.fingerprint());
    write_report_csv(csv, run.report, "ablation", header);
    header = false;
    write_report_table(std::cout, run.report);
  }
  std::cout << "ablate: results at " << (out / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& axis) {
  Config base_cfg = resolve_config(opts);
  fs::path out = resolve_out_dir(opts);
  Manifest data = load_manifest(out);
  BackboneParams backbone = load_backbone(out);
  std::uint64_t seed = base_cfg.get_u64("seed", 1);

  struct Axis {
    std::string key;
    std::vector<std::string> values;
  };
  std::map<std::string, Axis> axes = {
      {"dropout", {"prompt.dropout", {"0.0", "0.1", "0.2", "0.3", "0.4", "0.5"}}},
      {"m1", {"prompt.m1", {"1", "2", "3", "4", "5"}}},
      {"layout", {"prompt.layout", {"front", "middle", "end"}}},
  };
  std::vector<std::string> selected;
  if (axis == "all") {
    for (const auto& [name, a] : axes) selected.push_back(name);
  } else if (axes.count(axis)) {
    selected.push_back(axis);
  } else {
    throw CLI::ValidationError("unknown sweep axis: " + axis +
                               " (expected dropout, m1, layout, or all)");
  }

  for (const auto& name : selected) {
    const Axis& ax = axes.at(name);
    std::ofstream csv(out / ("sweep_" + name + ".csv"));
    csv << "axis,value,domain,variant,metric,K,metric_value,seed,fingerprint\n";
    std::map<std::string, std::vector<double>> series;  // e.g. "A HR@10"
    for (const auto& value : ax.values) {
      Config cfg = base_cfg;
      cfg.set(ax.key, value);
      ExperimentParams params = params_from_config(cfg);
      auto run = run_variant_experiment(Variant::full, data, backbone, params,
                                        seed, cfg.fingerprint());
      auto emit = [&](const char* domain, const DomainMetrics& m) {
        auto row = [&](const char* metric, int k, double v) {
          csv << name << ',' << value << ',' << domain << ",full," << metric
              << ',' << k << ',' << std::setprecision(17) << v << ',' << seed
              << ',' << cfg.fingerprint() << "\n";
          series[std::string(domain) + " " + metric + "@" + std::to_string(k)]
              .push_back(v);
        };
        row("HR", 10, m.hr10);
        row("HR", 20, m.hr20);
        row("NDCG", 10, m.ndcg10);
        row("NDCG", 20, m.ndcg20);
      };
      emit("A", run.report.a);
      emit("B", run.report.b);
      std::cout << "sweep " << name << "=" << value << ": HR@10 A "
                << run.report.a.hr10 << " B " << run.report.b.hr10 << "\n";
    }
    write_svg_plot(out / ("sweep_" + name + ".svg"),
                   "sweep over " + name, ax.values, series);
  }
  return 0;
}

int cmd_report(const CommonOpts& opts, const std::vector<std::string>& csv_paths) {
  fs::path out = resolve_out_dir(opts);
  // key: dataset|domain|variant|metric|K -> (sum, n); fingerprints must agree
  // per dataset.
  std::map<std::string, std::pair<double, int>> agg;
  std::map<std::string, std::string> dataset_fingerprint;
  for (const auto& path : csv_paths) {
    std::ifstream in(require_artifact(path, "result csv"));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (first && line.rfind("dataset,", 0) == 0) {
        first = false;
        continue;
      }
      first = false;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) f.push_back(cell);
      if (f.size() < 8)
        throw ArtifactError("malformed result row in " + path + ": " + line);
      const std::string& dataset = f[0];
      const std::string& fingerprint = f[7];
      auto it = dataset_fingerprint.find(dataset);
      if (it == dataset_fingerprint.end()) {
        dataset_fingerprint[dataset] = fingerprint;
      } else if (it->second != fingerprint) {
        throw ArtifactError("refusing to aggregate dataset '" + dataset +
                            "': fingerprint " + fingerprint + " in " + path +
                            " does not match " + it->second);
      }
      std::string key = f[0] + "," + f[1] + "," + f[2] + "," + f[3] + "," + f[4];
      auto& slot = agg[key];
      slot.first += std::stod(f[5]);
      slot.second += 1;
    }
  }
  if (agg.empty()) throw ArtifactError("report: no result rows found");
  fs::create_directories(out);
  std::ofstream summary(out / "report_summary.csv");
  summary << "dataset,domain,variant,metric,K,mean_value,runs\n";
  std::cout << "dataset,domain,variant,metric,K,mean_value,runs\n";
  for (const auto& [key, slot] : agg) {
    std::ostringstream row;
    row << key << ',' << std::setprecision(17) << slot.first / slot.second << ','
        << slot.second << "\n";
    summary << row.str();
    std::cout << row.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt-learning cross-domain sequential recommender"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string log_a_path, log_b_path;
  std::string sweep_axis = "all";
  std::vector<std::string> report_csvs;

  auto* synth = app.add_subcommand("synth", "generate the synthetic dual-domain corpus");
  add_common_flags(synth, opts);
  auto* ingest = app.add_subcommand("ingest", "build splits from two interaction logs");
  add_common_flags(ingest, opts);
  ingest->add_option("--log-a", log_a_path, "domain-A TSV log")->required();
  ingest->add_option("--log-b", log_b_path, "domain-B TSV log")->required();
  auto* pretrain = app.add_subcommand("pretrain", "jointly pre-train the backbone");
  add_common_flags(pretrain, opts);
  auto* prompt_train =
      app.add_subcommand("prompt-train", "optimize prompts against the frozen backbone");
  add_common_flags(prompt_train, opts);
  auto* eval_cmd = app.add_subcommand("eval", "rank the test split and report metrics");
  add_common_flags(eval_cmd, opts);
  auto* ablate = app.add_subcommand("ablate", "run every model variant");
  add_common_flags(ablate, opts);
  auto* sweep = app.add_subcommand("sweep", "hyper-parameter sensitivity sweeps");
  add_common_flags(sweep, opts);
  sweep->add_option("--axis", sweep_axis, "dropout|m1|layout|all");
  auto* report = app.add_subcommand("report", "aggregate result CSVs across seeds");
  add_common_flags(report, opts);
  report->add_option("csvs", report_csvs, "result csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(opts);
    if (ingest->parsed()) return cmd_ingest(opts, log_a_path, log_b_path);
    if (pretrain->parsed()) return cmd_pretrain(opts);
    if (prompt_train->parsed()) return cmd_prompt_train(opts);
    if (eval_cmd->parsed()) return cmd_eval(opts);
    if (ablate->parsed()) return cmd_ablate(opts);
    if (sweep->parsed()) return cmd_sweep(opts, sweep_axis);
    if (report->parsed()) return cmd_report(opts, report_csvs);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    if (what.find("non-finite") != std::string::npos ||
        what.find("numerical") != std::string::npos)
      return kExitNumerical;
    return kExitArtifact;
  }
  return kExitUsage;
}
