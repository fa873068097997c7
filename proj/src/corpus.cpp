#include "plcr/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace plcr {

namespace {

bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

InteractionLog parse_log(std::istream& in, Domain domain) {
  if (!in.good()) throw std::runtime_error("parse_log: unreadable input stream");
  InteractionLog log;
  log.domain = domain;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? std::string::npos
                                          : line.find('\t', tab1 + 1);
    std::int64_t ts = 0;
    if (tab1 == std::string::npos || tab2 == std::string::npos || tab1 == 0 ||
        tab2 == tab1 + 1 ||
        !parse_i64(std::string_view(line).substr(tab2 + 1), ts) || ts < 0) {
      ++log.malformed_lines;
      continue;
    }
    Interaction rec;
    rec.user = line.substr(0, tab1);
    rec.item = line.substr(tab1 + 1, tab2 - tab1 - 1);
    rec.domain = domain;
    rec.timestamp = ts;
    log.records.push_back(std::move(rec));
  }
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const Interaction& a, const Interaction& b) {
                     if (a.user != b.user) return a.user < b.user;
                     return a.timestamp < b.timestamp;
                   });
  return log;
}

InteractionLog kcore_filter(const InteractionLog& log, int k, bool single_pass) {
  if (k < 1) throw std::invalid_argument("kcore_filter: k must be >= 1");
  std::vector<Interaction> recs = log.records;
  for (;;) {
    std::unordered_map<std::string, std::size_t> user_deg, item_freq;
    for (const auto& r : recs) {
      ++user_deg[r.user];
      ++item_freq[r.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(recs.size());
    for (auto& r : recs) {
      if (user_deg[r.user] > static_cast<std::size_t>(k) &&
          item_freq[r.item] > static_cast<std::size_t>(k))
        kept.push_back(std::move(r));
    }
    bool stable = kept.size() == recs.size();
    recs = std::move(kept);
    if (stable || single_pass) break;
  }
  InteractionLog out;
  out.domain = log.domain;
  out.malformed_lines = log.malformed_lines;
  out.records = std::move(recs);
  return out;
}

DomainVocab build_vocab(const InteractionLog& log_a, const InteractionLog& log_b) {
  DomainVocab vocab;
  auto add_domain = [&vocab](const InteractionLog& log,
                             std::unordered_map<std::string, int>& map) {
    // First-appearance order keeps the mapping deterministic given the
    // sorted log.
    for (const auto& r : log.records) {
      auto [it, inserted] =
          map.emplace(r.item, static_cast<int>(vocab.to_external.size()));
      if (inserted) vocab.to_external.push_back(r.item);
    }
  };
  add_domain(log_a, vocab.to_internal_a);
  vocab.count_a = static_cast<int>(vocab.to_external.size());
  add_domain(log_b, vocab.to_internal_b);
  vocab.count_b = static_cast<int>(vocab.to_external.size()) - vocab.count_a;
  return vocab;
}

SequenceBuildResult build_sequences(const InteractionLog& log,
                                    const DomainVocab& vocab, int max_len) {
  if (max_len < 2) throw std::invalid_argument("build_sequences: max_len < 2");
  const auto& map =
      log.domain == Domain::A ? vocab.to_internal_a : vocab.to_internal_b;
  SequenceBuildResult result;
  std::size_t i = 0;
  const auto& recs = log.records;
  while (i < recs.size()) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].user == recs[i].user) ++j;
    std::size_t n = j - i;
    if (n < 2) {
      ++result.skipped_users;
      i = j;
      continue;
    }
    SequenceExample ex;
    ex.domain = log.domain;
    // Keep the most recent max_len - 1 prefix items.
    std::size_t prefix_len = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(max_len - 1));
    for (std::size_t p = (n - 1) - prefix_len; p < n - 1; ++p)
      ex.prefix.push_back(map.at(recs[i + p].item));
    ex.label = map.at(recs[j - 1].item);
    result.examples.push_back(std::move(ex));
    i = j;
  }
  return result;
}

DomainSplit split_sequences(std::vector<SequenceExample> examples,
                            const SplitRatios& ratios, std::uint64_t seed,
                            bool merge_validation_into_test) {
  double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_sequences: ratios must sum to 1");
  if (examples.size() < 3)
    throw std::runtime_error(
        "split_sequences: need at least 3 examples to form a split");
  std::mt19937_64 rng(seed);
  std::shuffle(examples.begin(), examples.end(), rng);
  std::size_t n = examples.size();
  auto n_train = static_cast<std::size_t>(ratios.train * static_cast<double>(n));
  auto n_val =
      static_cast<std::size_t>(ratios.validation * static_cast<double>(n));
  DomainSplit split;
  split.train.assign(examples.begin(), examples.begin() + n_train);
  split.validation.assign(examples.begin() + n_train,
                          examples.begin() + n_train + n_val);
  split.test.assign(examples.begin() + n_train + n_val, examples.end());
  if (merge_validation_into_test) {
    split.test.insert(split.test.end(), split.validation.begin(),
                      split.validation.end());
    split.validation.clear();
  }
  return split;
}

namespace {

DomainStats domain_stats(const InteractionLog& log) {
  DomainStats s;
  s.interactions = log.records.size();
  std::unordered_set<std::string> items;
  std::unordered_set<std::string> users;
  for (const auto& r : log.records) {
    items.insert(r.item);
    users.insert(r.user);
  }
  s.items = items.size();
  s.avg_sequence_length =
      users.empty() ? 0.0
                    : static_cast<double>(s.interactions) /
                          static_cast<double>(users.size());
  return s;
}

}  // namespace

CorpusStats corpus_stats(const InteractionLog& log_a,
                         const InteractionLog& log_b,
                         const DatasetSplit& split) {
  CorpusStats stats;
  stats.domain_a = domain_stats(log_a);
  stats.domain_b = domain_stats(log_b);
  auto count = [](const DomainSplit& s) {
    return s.train.size() + s.validation.size() + s.test.size();
  };
  stats.sequences = count(split.a) + count(split.b);
  stats.train_sequences = split.a.train.size() + split.b.train.size();
  stats.test_sequences = split.a.test.size() + split.b.test.size();
  stats.val_sequences = split.a.validation.size() + split.b.validation.size();
  return stats;
}

void write_stats(std::ostream& out, const CorpusStats& stats) {
  auto emit = [&out](const char* label, const DomainStats& s) {
    out << label << "\n";
    out << "#Items\t" << s.items << "\n";
    out << "#Interactions\t" << s.interactions << "\n";
    out << "#Avg.sequence length\t" << s.avg_sequence_length << "\n";
  };
  emit("A-domain", stats.domain_a);
  emit("B-domain", stats.domain_b);
  out << "#Sequences\t" << stats.sequences << "\n";
  out << "#Train-sequence\t" << stats.train_sequences << "\n";
  out << "#Test-sequence\t" << stats.test_sequences << "\n";
  out << "#Val-sequence\t" << stats.val_sequences << "\n";
}

}  // namespace plcr
