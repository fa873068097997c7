#pragma once

#include <string>

#include "plcr/types.hpp"

namespace plcr {

// `user<TAB>item<TAB>unix_timestamp` per line, same format corpus ingestion
// consumes.
void write_log_file(const std::string& path, const InteractionLog& log);
InteractionLog read_log_file(const std::string& path, Domain domain);

// Line-delimited split manifest: header comments carry the config
// fingerprint and split seed, `V` lines the vocabulary, `S` lines the
// sequences.
struct Manifest {
  DatasetSplit split;
  DomainVocab vocab;
  std::string fingerprint;
};

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

}  // namespace plcr
