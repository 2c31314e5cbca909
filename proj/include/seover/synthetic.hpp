#pragma once

// Synthetic corpora over the MELD label set for runnable fixtures and tests.
//
// keyword corpus: every utterance carries one emotion keyword among neutral
//   filler words; its label is that keyword's emotion.
// context corpus: dialogues mix keyword turns with content-free reaction
//   turns ("oh really ?") whose label is the previous turn's emotion, so
//   those turns can only be classified from context.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "seover/corpus.hpp"
#include "seover/random.hpp"

namespace seover::synthetic {

inline const std::vector<std::vector<std::string>>& emotion_keywords() {
  // indexed by MELD label id
  static const std::vector<std::vector<std::string>> kw{
      {"okay", "fine", "alright"},          // neutral
      {"wow", "unbelievable", "whoa"},      // surprise
      {"scared", "afraid", "terrified"},    // fear
      {"sad", "miserable", "heartbroken"},  // sadness
      {"happy", "wonderful", "delighted"},  // joy
      {"gross", "disgusting", "yuck"},      // disgust
      {"furious", "angry", "outraged"},     // angry
  };
  return kw;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> w{"i",    "you",   "we",  "the",   "that", "it",    "was",
                                          "is",   "so",    "just", "about", "this", "today", "feel",
                                          "my",   "job",   "they", "said",  "after", "dinner", "all"};
  return w;
}

inline const std::vector<std::string>& reaction_phrases() {
  static const std::vector<std::string> r{"oh really ?", "i see .", "and then ?", "hmm , go on .", "tell me more ."};
  return r;
}

inline std::string keyword_sentence(Rng& rng, std::size_t label) {
  const auto& fill = filler_words();
  const auto& kws = emotion_keywords()[label];
  const std::size_t n_fill = 2 + rng.below(4);
  const std::size_t kw_pos = rng.below(n_fill + 1);
  std::string s;
  for (std::size_t i = 0; i <= n_fill; ++i) {
    if (!s.empty()) s += ' ';
    s += i == kw_pos ? kws[rng.below(kws.size())] : fill[rng.below(fill.size())];
  }
  static const std::array<const char*, 4> ends{".", "!", "?", ""};
  s += ends[rng.below(ends.size())];
  if (rng.bernoulli(0.5)) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

/// `n_utterances` keyword utterances in dialogues of 5 turns, two speakers.
inline DialogueCorpus keyword_corpus(std::size_t n_utterances, std::uint64_t seed) {
  Rng rng(seed);
  const LabelSet labels = meld_labels();
  std::vector<Dialogue> ds;
  for (std::size_t i = 0; i < n_utterances; ++i) {
    if (i % 5 == 0) ds.push_back(Dialogue{"kw" + std::to_string(ds.size()), {}});
    Utterance u;
    u.dialogue_id = ds.back().id;
    u.turn_index = ds.back().turns.size();
    u.speaker = u.turn_index % 2 == 0 ? "A" : "B";
    // labels cycle so every class is represented
    const std::size_t label = i % labels.size();
    u.text = keyword_sentence(rng, label);
    u.label = labels.label(label);
    ds.back().turns.push_back(u);
  }
  return DialogueCorpus(labels, std::move(ds));
}

struct ContextCorpusOptions {
  std::size_t n_dialogues = 40;
  std::size_t n_dev = 6;
  std::size_t n_test = 6;
  double reaction_rate = 0.4;
};

inline DialogueCorpus context_corpus(const ContextCorpusOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  const LabelSet labels = meld_labels();
  const auto& reactions = reaction_phrases();
  std::vector<Dialogue> ds;
  const std::size_t n_train = opt.n_dialogues - opt.n_dev - opt.n_test;
  for (std::size_t d = 0; d < opt.n_dialogues; ++d) {
    Dialogue dlg{"ctx" + std::to_string(d), {}};
    const Split split = d < n_train ? Split::train : (d < n_train + opt.n_dev ? Split::dev : Split::test);
    const std::size_t len = 4 + rng.below(5);
    std::size_t prev_label = 0;
    bool prev_was_reaction = true;
    std::size_t speaker = 0;
    for (std::size_t t = 0; t < len; ++t) {
      Utterance u;
      u.dialogue_id = dlg.id;
      u.turn_index = t;
      u.split = split;
      const bool reaction = !prev_was_reaction && rng.bernoulli(opt.reaction_rate);
      if (reaction) {
        u.text = reactions[rng.below(reactions.size())];
        u.label = labels.label(prev_label);
        speaker = 1 - speaker;  // the other party reacts
      } else {
        prev_label = rng.below(labels.size());
        u.text = keyword_sentence(rng, prev_label);
        u.label = labels.label(prev_label);
        if (rng.bernoulli(0.6)) speaker = 1 - speaker;
      }
      prev_was_reaction = reaction;
      u.speaker = speaker == 0 ? "A" : "B";
      dlg.turns.push_back(std::move(u));
    }
    ds.push_back(std::move(dlg));
  }
  return DialogueCorpus(labels, std::move(ds));
}

}  // namespace seover::synthetic
