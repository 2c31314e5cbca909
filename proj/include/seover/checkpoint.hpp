#pragma once

// Checkpoint file layout:
//
//   SEOVER-CHECKPOINT 1
//   meta <key> <value>          (model configuration, one per line)
//   tensor <name> <rank> <d0> <d1> ...
//   ...
//   end
//   <raw payload>
//
// The payload holds every listed tensor's values in header order as
// little-endian IEEE-754 binary64, row-major, with no padding. The
// vocabulary lives in a sibling text file named by `meta vocab_file`.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "seover/errors.hpp"
#include "seover/model.hpp"

namespace seover {

inline constexpr const char* kCheckpointMagic = "SEOVER-CHECKPOINT 1";

namespace detail {

inline std::uint64_t to_little(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    std::uint64_t y = 0;
    for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return y;
  }
}

inline std::string join_labels(const LabelSet& l) {
  std::string s;
  for (std::size_t i = 0; i < l.size(); ++i) s += (i ? " " : "") + l.label(i);
  return s;
}

}  // namespace detail

struct CheckpointHeader {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Shape>> tensors;

  const std::string& get(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw ConfigError("checkpoint: missing meta '" + key + "'");
    return it->second;
  }
  std::size_t get_size(const std::string& key) const { return std::stoul(get(key)); }
};

/// Writes the checkpoint and its vocabulary file next to it (write-then-rename).
inline void save_checkpoint(const SeoverModel& model, const std::filesystem::path& path,
                            const std::string& vocab_file = "vocab.txt") {
  for (const auto& l : model.label_set().labels()) {
    if (l.find_first_of(" \t\n") != std::string::npos) throw ConfigError("checkpoint: label '" + l + "' contains whitespace");
  }
  const auto& c = model.config();
  std::ostringstream header;
  header << kCheckpointMagic << '\n';
  header << "meta d_model " << c.encoder.d_model << '\n';
  header << "meta n_layers " << c.encoder.n_layers << '\n';
  header << "meta n_heads " << c.encoder.n_heads << '\n';
  header << "meta d_ff " << c.encoder.d_ff << '\n';
  header << "meta max_len " << c.encoder.max_len << '\n';
  {
    std::ostringstream dr;
    dr.precision(17);
    dr << c.encoder.dropout_rate;
    header << "meta dropout_rate " << dr.str() << '\n';
  }
  header << "meta k_star " << model.k_star() << '\n';
  header << "meta label_set " << model.label_set().name() << '\n';
  header << "meta labels " << detail::join_labels(model.label_set()) << '\n';
  header << "meta fusion " << fusion_name(c.fusion) << '\n';
  header << "meta variant " << variant_name(c.variant) << '\n';
  header << "meta input_dim " << model.context().config().input_dim << '\n';
  header << "meta hidden_dim " << c.hidden_dim << '\n';
  header << "meta n_classes " << model.context().config().n_classes << '\n';
  header << "meta vocab_size " << model.vocabulary().size() << '\n';
  header << "meta vocab_file " << vocab_file << '\n';
  const auto params = model.parameters();
  for (const auto& [name, t] : params) {
    header << "tensor " << name << ' ' << t.rank();
    for (auto d : t.shape()) header << ' ' << d;
    header << '\n';
  }
  header << "end\n";

  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  {
    const auto vtmp = (dir / vocab_file).string() + ".tmp";
    std::ofstream vout(vtmp);
    if (!vout) throw DataError("cannot write vocabulary next to checkpoint '" + path.string() + "'");
    write_vocabulary(vout, model.vocabulary());
    vout.close();
    std::filesystem::rename(vtmp, dir / vocab_file);
  }
  const auto tmp = path.string() + ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : params) {
    for (double v : t.values()) {
      std::uint64_t bits = detail::to_little(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  out.close();
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
  std::filesystem::rename(tmp, path);
}

inline CheckpointHeader read_checkpoint_header(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw ConfigError("'" + what + "' is not a checkpoint");
  CheckpointHeader h;
  while (std::getline(in, line)) {
    if (line == "end") return h;
    std::istringstream ls(line);
    std::string kind, name;
    ls >> kind >> name;
    if (kind == "meta") {
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      h.meta[name] = rest;
    } else if (kind == "tensor") {
      std::size_t rank = 0;
      ls >> rank;
      Shape s(rank);
      for (auto& d : s) ls >> d;
      if (!ls) throw ConfigError("checkpoint '" + what + "': bad tensor line '" + line + "'");
      h.tensors.emplace_back(name, s);
    } else {
      throw ConfigError("checkpoint '" + what + "': unexpected header line '" + line + "'");
    }
  }
  throw ConfigError("checkpoint '" + what + "': header has no end marker");
}

inline CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint_header(in, path.string());
}

inline LabelSet checkpoint_label_set(const CheckpointHeader& h) {
  std::istringstream ls(h.get("labels"));
  std::vector<std::string> labels;
  std::string l;
  while (ls >> l) labels.push_back(l);
  return LabelSet(h.get("label_set"), labels);
}

inline SeoverModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  const auto h = read_checkpoint_header(in, path.string());

  ModelConfig c;
  c.encoder.d_model = h.get_size("d_model");
  c.encoder.n_layers = h.get_size("n_layers");
  c.encoder.n_heads = h.get_size("n_heads");
  c.encoder.d_ff = h.get_size("d_ff");
  c.encoder.max_len = h.get_size("max_len");
  c.encoder.dropout_rate = std::stod(h.get("dropout_rate"));
  c.fusion = parse_fusion(h.get("fusion"));
  c.variant = parse_variant(h.get("variant"));
  c.hidden_dim = h.get_size("hidden_dim");

  const auto vocab = load_vocabulary((path.parent_path() / h.get("vocab_file")).string());
  if (vocab.size() != h.get_size("vocab_size")) {
    throw ConfigError("checkpoint '" + path.string() + "': vocabulary file has " + std::to_string(vocab.size()) +
                      " ids, header says " + h.get("vocab_size"));
  }
  SeoverModel model(c, vocab, checkpoint_label_set(h), 0);
  if (model.context().config().input_dim != h.get_size("input_dim")) {
    throw ConfigError("checkpoint '" + path.string() + "': input_dim " + h.get("input_dim") +
                      " inconsistent with fusion mode " + h.get("fusion"));
  }
  auto params = model.parameters();
  if (params.size() != h.tensors.size()) throw ConfigError("checkpoint '" + path.string() + "': tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, t] = params[i];
    if (name != h.tensors[i].first || t.shape() != h.tensors[i].second) {
      throw ConfigError("checkpoint '" + path.string() + "': expected tensor " + name + shape_str(t.shape()) +
                        ", found " + h.tensors[i].first + shape_str(h.tensors[i].second));
    }
    for (double& v : t.data()) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
        throw ConfigError("checkpoint '" + path.string() + "': truncated payload");
      }
      v = std::bit_cast<double>(detail::to_little(bits));
    }
  }
  return model;
}

}  // namespace seover
