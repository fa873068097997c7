#pragma once

#include <iosfwd>
#include <vector>

#include "plcr/types.hpp"

namespace plcr {

// Parses `user<TAB>item<TAB>unix_timestamp` lines. Malformed lines are
// skipped and counted; records come back sorted by (user, timestamp).
InteractionLog parse_log(std::istream& in, Domain domain);

// Keeps users with more than k interactions and items with frequency more
// than k. Iterates alternating user/item pruning to a fixpoint unless
// single_pass is set.
InteractionLog kcore_filter(const InteractionLog& log, int k,
                            bool single_pass = false);

// Assigns contiguous internal ids; domain B follows domain A so the two
// ranges never intersect.
DomainVocab build_vocab(const InteractionLog& log_a, const InteractionLog& log_b);

struct SequenceBuildResult {
  std::vector<SequenceExample> examples;
  std::size_t skipped_users = 0;  // users with < 2 interactions post-filter
};

// One example per user: prefix = all but the last interaction truncated to
// the most recent max_len - 1 items, label = last interaction.
SequenceBuildResult build_sequences(const InteractionLog& log,
                                    const DomainVocab& vocab, int max_len);

struct SplitRatios {
  double train = 0.75;
  double validation = 0.10;
  double test = 0.15;
};

// Deterministic seeded shuffle, then contiguous cut at the ratio boundaries.
// With merge_validation_into_test the validation slice is appended to test.
DomainSplit split_sequences(std::vector<SequenceExample> examples,
                            const SplitRatios& ratios, std::uint64_t seed,
                            bool merge_validation_into_test = false);

// Table-1-style dataset statistics.
struct DomainStats {
  std::size_t items = 0;
  std::size_t interactions = 0;
  double avg_sequence_length = 0.0;
};

struct CorpusStats {
  DomainStats domain_a;
  DomainStats domain_b;
  std::size_t sequences = 0;
  std::size_t train_sequences = 0;
  std::size_t test_sequences = 0;
  std::size_t val_sequences = 0;
};

CorpusStats corpus_stats(const InteractionLog& log_a,
                         const InteractionLog& log_b,
                         const DatasetSplit& split);

void write_stats(std::ostream& out, const CorpusStats& stats);

}  // namespace plcr
