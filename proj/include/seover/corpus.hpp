#pragma once

// Dialogue corpus model, JSONL ingestion and dialogue-level splits.
//
// One JSON object per line:
//   {"dialogue_id": str, "turn_index": int, "speaker": str, "text": str,
//    "label": str|null, "split": "train"|"dev"|"test"   (split optional)}

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "seover/errors.hpp"
#include "seover/random.hpp"

namespace seover {

class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::string name, std::vector<std::string> labels) : name_(std::move(name)), labels_(std::move(labels)) {
    if (labels_.size() < 2) throw ConfigError("label set '" + name_ + "' needs at least 2 labels");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], i).second) {
        throw ConfigError("label set '" + name_ + "' repeats label '" + labels_[i] + "'");
      }
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t id) const { return labels_.at(id); }

  std::optional<std::size_t> id_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const LabelSet& o) const { return name_ == o.name_ && labels_ == o.labels_; }

 private:
  std::string name_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline LabelSet iemocap_labels() {
  return LabelSet("IEMOCAP", {"happy", "sad", "neutral", "angry", "excited", "frustrated"});
}

inline LabelSet meld_labels() {
  return LabelSet("MELD", {"neutral", "surprise", "fear", "sadness", "joy", "disgust", "angry"});
}

inline std::map<std::string, LabelSet> builtin_label_sets() {
  return {{"IEMOCAP", iemocap_labels()}, {"MELD", meld_labels()}};
}

/// Case-insensitive lookup of "iemocap" / "meld".
inline std::optional<LabelSet> builtin_label_set(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
  auto sets = builtin_label_sets();
  auto it = sets.find(name);
  if (it == sets.end()) return std::nullopt;
  return it->second;
}

enum class Split { train, dev, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  return std::nullopt;
}

struct Utterance {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::string speaker;
  std::string text;
  std::optional<std::string> label;
  std::optional<Split> split;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> turns;

  /// Speaker names mapped to dense ids in order of first appearance.
  std::vector<std::size_t> speaker_ids() const {
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::size_t> ids;
    ids.reserve(turns.size());
    for (const auto& u : turns) ids.push_back(seen.emplace(u.speaker, seen.size()).first->second);
    return ids;
  }
};

class DialogueCorpus {
 public:
  DialogueCorpus() = default;
  DialogueCorpus(LabelSet labels, std::vector<Dialogue> dialogues)
      : labels_(std::move(labels)), dialogues_(std::move(dialogues)) {}

  const LabelSet& label_set() const { return labels_; }
  const std::vector<Dialogue>& dialogues() const { return dialogues_; }
  std::size_t num_dialogues() const { return dialogues_.size(); }
  std::size_t num_utterances() const {
    std::size_t n = 0;
    for (const auto& d : dialogues_) n += d.turns.size();
    return n;
  }
  bool empty() const { return dialogues_.empty(); }

  bool fully_labeled() const {
    for (const auto& d : dialogues_)
      for (const auto& u : d.turns)
        if (!u.label) return false;
    return true;
  }

  /// Label ids of one dialogue; throws DataError when a turn is unlabeled.
  std::vector<std::size_t> label_ids(const Dialogue& d) const {
    std::vector<std::size_t> out;
    out.reserve(d.turns.size());
    for (const auto& u : d.turns) {
      if (!u.label) throw DataError("utterance " + d.id + "#" + std::to_string(u.turn_index) + " is unlabeled");
      auto id = labels_.id_of(*u.label);
      if (!id) throw DataError("label '" + *u.label + "' not in label set " + labels_.name());
      out.push_back(*id);
    }
    return out;
  }

 private:
  LabelSet labels_;
  std::vector<Dialogue> dialogues_;
};

struct LoadOptions {
  /// Reject labels outside the label set. Prediction inputs turn this off.
  bool validate_labels = true;
};

namespace detail {

inline Utterance parse_record(const std::string& line, std::size_t line_no) {
  const auto where = [&] { return "line " + std::to_string(line_no); };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(where() + ": JSON parse error: " + e.what());
  }
  if (!j.is_object()) throw DataError(where() + ": expected a JSON object");
  Utterance u;
  try {
    u.dialogue_id = j.at("dialogue_id").get<std::string>();
    const auto ti = j.at("turn_index").get<std::int64_t>();
    if (ti < 0) throw DataError(where() + ": negative turn_index");
    u.turn_index = static_cast<std::size_t>(ti);
    u.speaker = j.at("speaker").get<std::string>();
    u.text = j.at("text").get<std::string>();
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) u.label = it->get<std::string>();
    if (auto it = j.find("split"); it != j.end() && !it->is_null()) {
      const auto s = it->get<std::string>();
      u.split = parse_split(s);
      if (!u.split) throw DataError(where() + ": unknown split '" + s + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where() + ": bad record: " + e.what());
  }
  return u;
}

}  // namespace detail

inline DialogueCorpus parse_corpus(std::istream& in, const LabelSet& labels, LoadOptions opts = {}) {
  std::vector<Dialogue> dialogues;
  std::unordered_map<std::string, std::size_t> index;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> first_line;  // (dialogue, turn) -> line
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Utterance u = detail::parse_record(line, line_no);
    if (opts.validate_labels && u.label && !labels.id_of(*u.label)) {
      throw DataError("line " + std::to_string(line_no) + ": label '" + *u.label + "' is not in label set " +
                      labels.name());
    }
    auto [it, inserted] = index.emplace(u.dialogue_id, dialogues.size());
    if (inserted) dialogues.push_back(Dialogue{u.dialogue_id, {}});
    auto key = std::make_pair(it->second, u.turn_index);
    if (auto prev = first_line.find(key); prev != first_line.end()) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate turn_index " + std::to_string(u.turn_index) +
                      " in dialogue '" + u.dialogue_id + "' (first at line " + std::to_string(prev->second) + ")");
    }
    first_line.emplace(key, line_no);
    dialogues[it->second].turns.push_back(std::move(u));
  }
  for (auto& d : dialogues) {
    std::sort(d.turns.begin(), d.turns.end(),
              [](const Utterance& a, const Utterance& b) { return a.turn_index < b.turn_index; });
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].turn_index != i) {
        throw DataError("dialogue '" + d.id + "': turn_index gap, expected " + std::to_string(i) + " got " +
                        std::to_string(d.turns[i].turn_index));
      }
    }
  }
  return DialogueCorpus(labels, std::move(dialogues));
}

inline DialogueCorpus load_corpus(const std::string& path, const LabelSet& labels, LoadOptions opts = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, labels, opts);
}

inline nlohmann::ordered_json utterance_json(const Utterance& u) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = u.dialogue_id;
  j["turn_index"] = u.turn_index;
  j["speaker"] = u.speaker;
  j["text"] = u.text;
  j["label"] = u.label ? nlohmann::ordered_json(*u.label) : nlohmann::ordered_json(nullptr);
  if (u.split) j["split"] = split_name(*u.split);
  return j;
}

/// Writes dialogues in corpus order, turns in turn order.
inline void write_corpus(std::ostream& out, const DialogueCorpus& corpus) {
  for (const auto& d : corpus.dialogues())
    for (const auto& u : d.turns) out << utterance_json(u).dump() << '\n';
}

struct CorpusSplits {
  DialogueCorpus train, dev, test;
};

/// Assigns whole dialogues to train/dev/test. Dialogues whose records carry
/// a `split` tag go where the tag says; the rest are shuffled under `seed`
/// and divided by `ratios`.
inline CorpusSplits split_corpus(const DialogueCorpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be nonnegative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::array<std::vector<Dialogue>, 3> parts;
  std::vector<std::size_t> untagged;
  for (std::size_t i = 0; i < corpus.dialogues().size(); ++i) {
    const auto& d = corpus.dialogues()[i];
    std::optional<Split> tag;
    bool any_untagged = false;
    for (const auto& u : d.turns) {
      if (!u.split) {
        any_untagged = true;
        continue;
      }
      if (tag && *tag != *u.split) throw DataError("dialogue '" + d.id + "' has turns in different splits");
      tag = u.split;
    }
    if (tag && any_untagged) throw DataError("dialogue '" + d.id + "' is only partially split-tagged");
    if (tag) {
      parts[static_cast<std::size_t>(*tag)].push_back(d);
    } else {
      untagged.push_back(i);
    }
  }

  if (!untagged.empty()) {
    std::size_t nonzero = 0;
    for (double r : ratios) nonzero += r > 0.0 ? 1 : 0;
    const std::size_t n = untagged.size();
    if (n < nonzero) {
      throw DataError("cannot split " + std::to_string(n) + " dialogues into " + std::to_string(nonzero) +
                      " nonempty parts");
    }
    Rng rng(seed);
    rng.shuffle(untagged);
    std::array<std::size_t, 3> counts{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 2; ++k) {
      counts[k] = static_cast<std::size_t>(std::llround(ratios[k] * static_cast<double>(n)));
      if (ratios[k] > 0.0) counts[k] = std::max<std::size_t>(counts[k], 1);
      counts[k] = std::min(counts[k], n - assigned);
      assigned += counts[k];
    }
    counts[2] = n - assigned;
    // every nonzero part gets at least one dialogue, borrowing from the largest
    for (std::size_t k = 0; k < 3; ++k) {
      if (ratios[k] > 0.0 && counts[k] == 0) {
        auto big = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        --counts[big];
        ++counts[k];
      } else if (ratios[k] == 0.0 && counts[k] > 0) {
        auto big = static_cast<std::size_t>(std::max_element(ratios.begin(), ratios.end()) - ratios.begin());
        counts[big] += counts[k];
        counts[k] = 0;
      }
    }
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t c = 0; c < counts[k]; ++c) parts[k].push_back(corpus.dialogues()[untagged[pos++]]);
    // restore corpus order inside each part
    std::unordered_map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < corpus.dialogues().size(); ++i) order[corpus.dialogues()[i].id] = i;
    for (auto& p : parts)
      std::sort(p.begin(), p.end(), [&](const Dialogue& a, const Dialogue& b) { return order[a.id] < order[b.id]; });
  }

  return CorpusSplits{DialogueCorpus(corpus.label_set(), std::move(parts[0])),
                      DialogueCorpus(corpus.label_set(), std::move(parts[1])),
                      DialogueCorpus(corpus.label_set(), std::move(parts[2]))};
}

inline const DialogueCorpus& split_of(const CorpusSplits& s, Split which) {
  switch (which) {
    case Split::train: return s.train;
    case Split::dev: return s.dev;
    case Split::test: return s.test;
  }
  return s.train;
}

}  // namespace seover
