#include "plcr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "plcr/checksum.hpp"

namespace plcr {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'C', 'R', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string read_str(std::istream& in) {
  std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

const ad::Mat& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, m] : blocks)
    if (n == name) return m;
  throw std::runtime_error("checkpoint: missing block '" + name + "'");
}

bool Checkpoint::has_block(const std::string& name) const {
  for (const auto& [n, m] : blocks)
    if (n == name) return true;
  return false;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, sizeof kMagic);
  write_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_str(out, k);
    write_str(out, v);
  }
  out.put(frozen ? 1 : 0);
  write_u64(out, checksum);
  write_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, m] : blocks) {
    write_str(out, name);
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double v = m(r, c);
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        write_u64(out, bits);
      }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  std::uint32_t n_meta = read_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_str(in);
    ckpt.meta[k] = read_str(in);
  }
  ckpt.frozen = in.get() != 0;
  ckpt.checksum = read_u64(in);
  std::uint32_t n_blocks = read_u32(in);
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    std::string name = read_str(in);
    std::uint32_t rows = read_u32(in);
    std::uint32_t cols = read_u32(in);
    ad::Mat m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        std::uint64_t bits = read_u64(in);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        m(r, c) = v;
      }
    ckpt.blocks.emplace_back(std::move(name), std::move(m));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return ckpt;
}

Checkpoint backbone_to_checkpoint(const BackboneParams& params) {
  Checkpoint ckpt;
  ckpt.frozen = params.frozen;
  ckpt.checksum = backbone_checksum(params);
  ckpt.meta["kind"] = "backbone";
  ckpt.meta["dim"] = std::to_string(params.cfg.dim);
  ckpt.meta["max_len"] = std::to_string(params.cfg.max_len);
  ckpt.meta["blocks"] = std::to_string(params.cfg.blocks);
  ckpt.meta["heads"] = std::to_string(params.cfg.heads);
  ckpt.meta["dropout"] = std::to_string(params.cfg.dropout);
  ckpt.meta["vocab_size"] = std::to_string(params.vocab_size);
  const_cast<BackboneParams&>(params).for_each(
      [&ckpt](const std::string& name, const ad::Mat& m) {
        ckpt.blocks.emplace_back(name, m);
      });
  return ckpt;
}

BackboneParams backbone_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.at("kind") != "backbone")
    throw std::runtime_error("checkpoint: not a backbone checkpoint");
  BackboneParams p;
  p.cfg.dim = std::stoi(ckpt.meta.at("dim"));
  p.cfg.max_len = std::stoi(ckpt.meta.at("max_len"));
  p.cfg.blocks = std::stoi(ckpt.meta.at("blocks"));
  p.cfg.heads = std::stoi(ckpt.meta.at("heads"));
  p.cfg.dropout = std::stod(ckpt.meta.at("dropout"));
  p.vocab_size = std::stoi(ckpt.meta.at("vocab_size"));
  p.blocks.resize(static_cast<std::size_t>(p.cfg.blocks));
  p.frozen = ckpt.frozen;
  p.for_each([&ckpt](const std::string& name, ad::Mat& m) {
    m = ckpt.block(name);
  });
  if (ckpt.checksum != backbone_checksum(p))
    throw std::runtime_error("checkpoint: backbone checksum mismatch");
  return p;
}

Checkpoint prompts_to_checkpoint(const PlcrModel& model) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "prompts";
  ckpt.meta["m1"] = std::to_string(model.prompts.m1);
  ckpt.meta["m2"] = std::to_string(model.prompts.m2);
  ckpt.meta["layout"] = layout_name(model.prompts.layout);
  ckpt.meta["separate_shared"] = model.prompts.separate_shared ? "1" : "0";
  ckpt.meta["enc_blocks"] = std::to_string(model.enc_cfg.blocks);
  ckpt.meta["enc_heads"] = std::to_string(model.enc_cfg.heads);
  ckpt.meta["enc_dropout"] = std::to_string(model.enc_cfg.dropout);
  ckpt.meta["enc_agg_hidden"] = std::to_string(model.enc_cfg.agg_hidden);
  ckpt.meta["enc_positional"] = model.enc_cfg.use_positional ? "1" : "0";
  ckpt.meta["enc_attention_agg"] =
      model.enc_cfg.attention_aggregation ? "1" : "0";
  ckpt.meta["backbone_checksum"] = std::to_string(model.backbone_checksum);
  const_cast<PlcrModel&>(model).prompts.for_each(
      [&ckpt](const std::string& name, const ad::Mat& m) {
        ckpt.blocks.emplace_back(name, m);
      });
  const_cast<PlcrModel&>(model).encoder_a.for_each(
      "encoder_a", [&ckpt](const std::string& name, const ad::Mat& m) {
        ckpt.blocks.emplace_back(name, m);
      });
  const_cast<PlcrModel&>(model).encoder_b.for_each(
      "encoder_b", [&ckpt](const std::string& name, const ad::Mat& m) {
        ckpt.blocks.emplace_back(name, m);
      });
  Fnv1a h;
  for (const auto& [name, m] : ckpt.blocks) {
    h.update(name);
    h.update(m);
  }
  ckpt.checksum = h.digest();
  return ckpt;
}

void prompts_from_checkpoint(const Checkpoint& ckpt, PlcrModel& model) {
  if (ckpt.meta.at("kind") != "prompts")
    throw std::runtime_error("checkpoint: not a prompt checkpoint");
  std::uint64_t against = std::stoull(ckpt.meta.at("backbone_checksum"));
  if (against != model.backbone_checksum)
    throw std::runtime_error(
        "checkpoint: prompt checkpoint was trained against a different "
        "backbone (checksum mismatch)");
  model.prompts.m1 = std::stoi(ckpt.meta.at("m1"));
  model.prompts.m2 = std::stoi(ckpt.meta.at("m2"));
  model.prompts.dim = model.backbone.cfg.dim;
  model.prompts.layout = layout_from_name(ckpt.meta.at("layout"));
  model.prompts.separate_shared = ckpt.meta.at("separate_shared") == "1";
  model.enc_cfg.blocks = std::stoi(ckpt.meta.at("enc_blocks"));
  model.enc_cfg.heads = std::stoi(ckpt.meta.at("enc_heads"));
  model.enc_cfg.dropout = std::stod(ckpt.meta.at("enc_dropout"));
  model.enc_cfg.agg_hidden = std::stoi(ckpt.meta.at("enc_agg_hidden"));
  model.enc_cfg.use_positional = ckpt.meta.at("enc_positional") == "1";
  model.enc_cfg.attention_aggregation = ckpt.meta.at("enc_attention_agg") == "1";
  int dim = model.backbone.cfg.dim;
  model.prompts.shared.resize(model.prompts.m1, dim);
  model.prompts.shared_b.resize(
      model.prompts.separate_shared ? model.prompts.m1 : 0, dim);
  model.prompts.domain_a.resize(model.prompts.m2, dim);
  model.prompts.domain_b.resize(model.prompts.m2, dim);
  model.encoder_a.blocks.resize(static_cast<std::size_t>(model.enc_cfg.blocks));
  model.encoder_b.blocks.resize(static_cast<std::size_t>(model.enc_cfg.blocks));
  model.prompts.for_each([&ckpt](const std::string& name, ad::Mat& m) {
    m = ckpt.block(name);
  });
  model.encoder_a.for_each("encoder_a",
                           [&ckpt](const std::string& name, ad::Mat& m) {
                             m = ckpt.block(name);
                           });
  model.encoder_b.for_each("encoder_b",
                           [&ckpt](const std::string& name, ad::Mat& m) {
                             m = ckpt.block(name);
                           });
}

}  // namespace plcr
