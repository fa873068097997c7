#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace plcr {

enum class Domain { A, B };

inline const char* domain_name(Domain d) { return d == Domain::A ? "A" : "B"; }

struct Interaction {
  std::string user;
  std::string item;
  Domain domain = Domain::A;
  std::int64_t timestamp = 0;
};

// Raw per-domain event log, sorted by (user, timestamp).
struct InteractionLog {
  Domain domain = Domain::A;
  std::vector<Interaction> records;
  std::size_t malformed_lines = 0;
};

// One training/eval unit: prefix (oldest first, internal ids) plus the
// chronologically last interaction as label.
struct SequenceExample {
  std::vector<int> prefix;
  int label = -1;
  Domain domain = Domain::A;
};

// Bijective external<->internal item id maps. Domain B ids are offset by
// count_a so both domains occupy one disjoint contiguous range.
struct DomainVocab {
  std::unordered_map<std::string, int> to_internal_a;
  std::unordered_map<std::string, int> to_internal_b;
  std::vector<std::string> to_external;
  int count_a = 0;
  int count_b = 0;

  int offset_b() const { return count_a; }
  int total() const { return count_a + count_b; }
  int count(Domain d) const { return d == Domain::A ? count_a : count_b; }
  int base(Domain d) const { return d == Domain::A ? 0 : count_a; }
  bool in_domain(int id, Domain d) const {
    return id >= base(d) && id < base(d) + count(d);
  }
  // 0-based index of an internal id inside its own domain range.
  int local_index(int id, Domain d) const { return id - base(d); }
};

struct DomainSplit {
  std::vector<SequenceExample> train;
  std::vector<SequenceExample> validation;
  std::vector<SequenceExample> test;
};

struct DatasetSplit {
  DomainSplit a;
  DomainSplit b;
  std::uint64_t seed = 0;
};

inline const DomainSplit& domain_split(const DatasetSplit& s, Domain d) {
  return d == Domain::A ? s.a : s.b;
}
inline DomainSplit& domain_split(DatasetSplit& s, Domain d) {
  return d == Domain::A ? s.a : s.b;
}

}  // namespace plcr
