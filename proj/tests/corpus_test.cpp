#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "seover/corpus.hpp"
#include "seover/random.hpp"

using namespace seover;

namespace {

DialogueCorpus parse(const std::string& text, const LabelSet& labels = meld_labels()) {
  std::istringstream in(text);
  return parse_corpus(in, labels);
}

std::string record(const std::string& d, int turn, const std::string& label, const std::string& extra = "") {
  return R"({"dialogue_id":")" + d + R"(","turn_index":)" + std::to_string(turn) +
         R"(,"speaker":"A","text":"hi","label":")" + label + "\"" + extra + "}\n";
}

}  // namespace

TEST(LabelSets, BuiltinTaxonomies) {
  const auto sets = builtin_label_sets();
  const auto& iemocap = sets.at("IEMOCAP");
  const auto& meld = sets.at("MELD");
  EXPECT_EQ(iemocap.size(), 6u);
  EXPECT_EQ(meld.size(), 7u);
  EXPECT_EQ(iemocap.labels(),
            (std::vector<std::string>{"happy", "sad", "neutral", "angry", "excited", "frustrated"}));
  EXPECT_EQ(meld.labels(),
            (std::vector<std::string>{"neutral", "surprise", "fear", "sadness", "joy", "disgust", "angry"}));
  EXPECT_EQ(*meld.id_of("neutral"), 0u);
}

TEST(LabelSets, IdsAreBijection) {
  for (const auto& [name, ls] : builtin_label_sets()) {
    std::set<std::size_t> ids;
    for (const auto& l : ls.labels()) ids.insert(*ls.id_of(l));
    EXPECT_EQ(ids.size(), ls.size());
    EXPECT_EQ(*ids.rbegin(), ls.size() - 1);
    for (std::size_t i = 0; i < ls.size(); ++i) EXPECT_EQ(*ls.id_of(ls.label(i)), i);
  }
}

TEST(LabelSets, RejectsDuplicatesAndSingletons) {
  EXPECT_THROW(LabelSet("x", {"a", "a"}), ConfigError);
  EXPECT_THROW(LabelSet("x", {"a"}), ConfigError);
}

TEST(LoadCorpus, TwoLineDialogue) {
  const auto c = parse(record("d", 1, "joy") + record("d", 0, "neutral"));
  ASSERT_EQ(c.num_dialogues(), 1u);
  ASSERT_EQ(c.dialogues()[0].turns.size(), 2u);
  EXPECT_EQ(*c.dialogues()[0].turns[0].label, "neutral");
}

TEST(LoadCorpus, ForeignLabelNamesValueAndLine) {
  try {
    parse(record("d", 0, "joy") + record("d", 1, "excited"));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("excited"), std::string::npos);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
  }
}

TEST(LoadCorpus, ParseErrorCarriesLineNumber) {
  try {
    parse(record("d", 0, "joy") + "{not json\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadCorpus, TurnGapAndDuplicateRejected) {
  EXPECT_THROW(parse(record("d", 0, "joy") + record("d", 2, "joy")), DataError);
  EXPECT_THROW(parse(record("d", 0, "joy") + record("d", 0, "joy")), DataError);
}

TEST(LoadCorpus, EmptyTextAndNullLabelKept) {
  const auto c = parse(R"({"dialogue_id":"d","turn_index":0,"speaker":"A","text":"","label":null})"
                       "\n");
  EXPECT_EQ(c.dialogues()[0].turns[0].text, "");
  EXPECT_FALSE(c.dialogues()[0].turns[0].label.has_value());
  EXPECT_FALSE(c.fully_labeled());
}

TEST(LoadCorpus, MeldSizedCorpusMatchesLineCountOracle) {
  // 1,432 dialogues totalling 13,708 utterances, as in the MELD release
  const auto path = std::filesystem::temp_directory_path() / "seover_meld_shaped.jsonl";
  const LabelSet meld = meld_labels();
  Rng rng(99);
  {
    std::ofstream out(path);
    std::size_t written = 0;
    for (std::size_t d = 0; d < 1432; ++d) {
      const std::size_t remaining_d = 1432 - d;
      const std::size_t len = d == 1431 ? 13708 - written : (13708 - written) / remaining_d + (rng.bernoulli(0.5) ? 1 : 0);
      for (std::size_t t = 0; t < len; ++t) {
        out << record("m" + std::to_string(d), static_cast<int>(t), meld.label(rng.below(meld.size())));
      }
      written += len;
    }
  }
  std::map<std::string, std::size_t> oracle;
  std::size_t lines = 0;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      ++lines;
      const auto k = line.find("\"label\":\"");
      const auto start = k + 9;
      ++oracle[line.substr(start, line.find('"', start) - start)];
    }
  }
  const auto c = load_corpus(path.string(), meld);
  std::filesystem::remove(path);
  EXPECT_EQ(lines, 13708u);
  EXPECT_EQ(c.num_utterances(), 13708u);
  EXPECT_EQ(c.num_dialogues(), 1432u);
  std::map<std::string, std::size_t> counted;
  for (const auto& d : c.dialogues())
    for (const auto& u : d.turns) ++counted[*u.label];
  EXPECT_EQ(counted, oracle);
}

TEST(WriteCorpus, RoundTripIsLineOrderNormalized) {
  std::string text;
  for (int d = 0; d < 3; ++d)
    for (int t = 2; t >= 0; --t) text += record("d" + std::to_string(d), t, "joy", R"(,"split":"dev")");
  const auto c = parse(text);
  std::ostringstream out;
  write_corpus(out, c);
  auto sorted_lines = [](const std::string& s) {
    std::vector<std::string> ls;
    std::istringstream in(s);
    std::string l;
    while (std::getline(in, l)) ls.push_back(l);
    std::sort(ls.begin(), ls.end());
    return ls;
  };
  EXPECT_EQ(sorted_lines(out.str()), sorted_lines(text));
}

TEST(SplitCorpus, AllTrain) {
  std::string text;
  for (int d = 0; d < 5; ++d) text += record("d" + std::to_string(d), 0, "joy");
  const auto s = split_corpus(parse(text), {1, 0, 0}, 1);
  EXPECT_EQ(s.train.num_dialogues(), 5u);
  EXPECT_TRUE(s.dev.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(SplitCorpus, DeterministicPartition) {
  std::string text;
  for (int d = 0; d < 10; ++d)
    for (int t = 0; t < 3; ++t) text += record("d" + std::to_string(d), t, "joy");
  const auto c = parse(text);
  const auto a = split_corpus(c, {0.8, 0.1, 0.1}, 7);
  const auto b = split_corpus(c, {0.8, 0.1, 0.1}, 7);
  auto ids = [](const DialogueCorpus& x) {
    std::vector<std::string> v;
    for (const auto& d : x.dialogues()) v.push_back(d.id);
    return v;
  };
  EXPECT_EQ(ids(a.train), ids(b.train));
  EXPECT_EQ(ids(a.dev), ids(b.dev));
  EXPECT_EQ(ids(a.test), ids(b.test));
  EXPECT_EQ(a.train.num_dialogues(), 8u);
  EXPECT_EQ(a.dev.num_dialogues(), 1u);
  EXPECT_EQ(a.test.num_dialogues(), 1u);

  std::multiset<std::string> all;
  for (const auto* part : {&a.train, &a.dev, &a.test})
    for (const auto& id : ids(*part)) all.insert(id);
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), 10u);
}

TEST(SplitCorpus, TagsOverrideRatios) {
  const auto c = parse(record("a", 0, "joy", R"(,"split":"test")") + record("b", 0, "joy", R"(,"split":"dev")"));
  const auto s = split_corpus(c, {1, 0, 0}, 3);
  EXPECT_TRUE(s.train.empty());
  EXPECT_EQ(s.dev.dialogues()[0].id, "b");
  EXPECT_EQ(s.test.dialogues()[0].id, "a");
}

TEST(SplitCorpus, TooFewDialogues) {
  EXPECT_THROW(split_corpus(parse(record("a", 0, "joy")), {0.5, 0.5, 0}, 1), DataError);
}

TEST(SplitCorpus, RatiosMustSumToOne) {
  EXPECT_THROW(split_corpus(parse(record("a", 0, "joy")), {0.5, 0.2, 0}, 1), ConfigError);
}

TEST(Dialogue, SpeakerIdsDenseByFirstAppearance) {
  Dialogue d{"x", {}};
  for (const char* s : {"Ross", "Rachel", "Ross", "Joey"}) d.turns.push_back({"x", d.turns.size(), s, "", {}, {}});
  EXPECT_EQ(d.speaker_ids(), (std::vector<std::size_t>{0, 1, 0, 2}));
}
