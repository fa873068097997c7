#include "plcr/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "plcr/corpus.hpp"

namespace plcr {

void write_log_file(const std::string& path, const InteractionLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& r : log.records)
    out << r.user << '\t' << r.item << '\t' << r.timestamp << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

InteractionLog read_log_file(const std::string& path, Domain domain) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_log(in, domain);
}

namespace {

const char* split_name(int s) {
  return s == 0 ? "train" : s == 1 ? "validation" : "test";
}

void write_examples(std::ostream& out, const std::vector<SequenceExample>& exs,
                    const char* domain, const char* split) {
  for (const auto& ex : exs) {
    out << "S\t" << domain << '\t' << split << '\t';
    for (std::size_t i = 0; i < ex.prefix.size(); ++i) {
      if (i) out << ',';
      out << ex.prefix[i];
    }
    out << '\t' << ex.label << '\n';
  }
}

}  // namespace

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "#plcr-manifest v1\n";
  out << "#fingerprint " << manifest.fingerprint << '\n';
  out << "#seed " << manifest.split.seed << '\n';
  out << "#vocab " << manifest.vocab.count_a << ' ' << manifest.vocab.count_b
      << '\n';
  for (int id = 0; id < manifest.vocab.total(); ++id)
    out << "V\t" << (id < manifest.vocab.count_a ? "A" : "B") << '\t' << id
        << '\t' << manifest.vocab.to_external[static_cast<std::size_t>(id)]
        << '\n';
  const DomainSplit* splits[2] = {&manifest.split.a, &manifest.split.b};
  const char* names[2] = {"A", "B"};
  for (int d = 0; d < 2; ++d) {
    write_examples(out, splits[d]->train, names[d], split_name(0));
    write_examples(out, splits[d]->validation, names[d], split_name(1));
    write_examples(out, splits[d]->test, names[d], split_name(2));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  Manifest m;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "plcr-manifest") saw_header = true;
      else if (key == "fingerprint") ss >> m.fingerprint;
      else if (key == "seed") ss >> m.split.seed;
      else if (key == "vocab") ss >> m.vocab.count_a >> m.vocab.count_b;
      continue;
    }
    std::istringstream ss(line);
    std::string tag;
    std::getline(ss, tag, '\t');
    if (tag == "V") {
      std::string domain, id_str, external;
      std::getline(ss, domain, '\t');
      std::getline(ss, id_str, '\t');
      std::getline(ss, external, '\t');
      int id = std::stoi(id_str);
      if (id != static_cast<int>(m.vocab.to_external.size()))
        throw std::runtime_error("manifest: vocab ids out of order");
      m.vocab.to_external.push_back(external);
      if (domain == "A")
        m.vocab.to_internal_a[external] = id;
      else
        m.vocab.to_internal_b[external] = id;
    } else if (tag == "S") {
      std::string domain, split, prefix, label;
      std::getline(ss, domain, '\t');
      std::getline(ss, split, '\t');
      std::getline(ss, prefix, '\t');
      std::getline(ss, label, '\t');
      SequenceExample ex;
      ex.domain = domain == "A" ? Domain::A : Domain::B;
      ex.label = std::stoi(label);
      std::istringstream ps(prefix);
      std::string id;
      while (std::getline(ps, id, ',')) ex.prefix.push_back(std::stoi(id));
      DomainSplit& ds = domain_split(m.split, ex.domain);
      if (split == "train") ds.train.push_back(std::move(ex));
      else if (split == "validation") ds.validation.push_back(std::move(ex));
      else if (split == "test") ds.test.push_back(std::move(ex));
      else throw std::runtime_error("manifest: unknown split " + split);
    } else {
      throw std::runtime_error("manifest: unknown record tag " + tag);
    }
  }
  if (!saw_header) throw std::runtime_error("manifest: missing header in " + path);
  return m;
}

}  // namespace plcr
