#include "plcr/synthgen.hpp"

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace plcr {

namespace {

// Samples an index in [0, n) with probability proportional to
// 1 / (i+1)^exponent; exponent 0 degenerates to uniform.
int sample_index(std::mt19937_64& rng, int n, double exponent) {
  if (exponent <= 0.0) {
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(rng);
  }
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = 1.0 / std::pow(i + 1.0, exponent);
  std::discrete_distribution<int> dist(w.begin(), w.end());
  return dist(rng);
}

InteractionLog gen_domain(const SynthConfig& cfg, Domain domain,
                          const std::vector<int>& user_cluster,
                          std::mt19937_64& rng) {
  const char* tag = domain == Domain::A ? "A" : "B";
  const int per_cluster = cfg.items_per_domain / cfg.n_clusters;
  InteractionLog log;
  log.domain = domain;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> len_dist(cfg.min_seq_len, cfg.max_seq_len);
  const int out_count = cfg.items_per_domain - per_cluster;
  for (int u = 0; u < cfg.users_per_domain; ++u) {
    int cluster = user_cluster[static_cast<std::size_t>(u)];
    int len = len_dist(rng);
    for (int t = 0; t < len; ++t) {
      int item;
      // In-cluster with probability exactly p_in; the remainder is spread
      // uniformly over the other clusters' items.
      if (out_count == 0 || coin(rng) < cfg.p_in) {
        item = cluster * per_cluster + sample_index(rng, per_cluster, cfg.zipf_exponent);
      } else {
        std::uniform_int_distribution<int> out_item(0, out_count - 1);
        int r = out_item(rng);
        item = r < cluster * per_cluster ? r : r + per_cluster;
      }
      Interaction rec;
      rec.user = std::string("u") + tag + std::to_string(u);
      rec.item = std::string("i") + tag + std::to_string(item);
      rec.domain = domain;
      rec.timestamp = t;
      log.records.push_back(std::move(rec));
    }
  }
  return log;
}

}  // namespace

std::pair<InteractionLog, InteractionLog> gen_dual_domain(const SynthConfig& cfg) {
  if (cfg.n_clusters < 1) throw std::invalid_argument("synthgen: n_clusters < 1");
  if (cfg.items_per_domain % cfg.n_clusters != 0)
    throw std::invalid_argument(
        "synthgen: items_per_domain must be divisible by n_clusters");
  // p_in == 1/G is chance level and permitted for calibration runs; transfer
  // experiments want p_in well above it.
  if (cfg.p_in <= 0.0 || cfg.p_in > 1.0)
    throw std::invalid_argument("synthgen: need 0 < p_in <= 1");
  if (cfg.min_seq_len < 2 || cfg.max_seq_len < cfg.min_seq_len)
    throw std::invalid_argument("synthgen: bad sequence length bounds");

  std::mt19937_64 rng(cfg.seed);
  // The same cluster assignment process drives both domains; users differ but
  // the latent interest structure is shared.
  std::uniform_int_distribution<int> cluster_dist(0, cfg.n_clusters - 1);
  std::vector<int> clusters_a(static_cast<std::size_t>(cfg.users_per_domain));
  std::vector<int> clusters_b(static_cast<std::size_t>(cfg.users_per_domain));
  for (auto& c : clusters_a) c = cluster_dist(rng);
  for (auto& c : clusters_b) c = cluster_dist(rng);

  InteractionLog log_a = gen_domain(cfg, Domain::A, clusters_a, rng);
  InteractionLog log_b = gen_domain(cfg, Domain::B, clusters_b, rng);
  return {std::move(log_a), std::move(log_b)};
}

}  // namespace plcr
