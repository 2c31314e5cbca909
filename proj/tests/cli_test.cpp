#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "seover/cli.hpp"
#include "seover/synthetic.hpp"

using namespace seover;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "seover");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

const char* kConfig = R"({
  "corpus": "corpus.jsonl",
  "out_dir": "run",
  "label_set": "meld",
  "split_ratios": [0.6, 0.2, 0.2],
  "encoder": {"d_model": 8, "n_layers": 1, "n_heads": 2, "d_ff": 16, "max_len": 16, "dropout": 0.1},
  "context": {"variant": "speaker_rnn", "hidden_dim": 6},
  "train": {"stage1_epochs": 2, "stage2_epochs": 2, "learning_rate": 0.003, "batch_size": 4, "seed": 3}
})";

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "seover_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ostringstream corpus;
    write_corpus(corpus, synthetic::keyword_corpus(50, 11));
    spit(dir_ / "corpus.jsonl", corpus.str());
    spit(dir_ / "run.json", kConfig);
    const auto r = run_cli({"train", "--config", cfg()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string cfg() { return (dir_ / "run.json").string(); }
  static fs::path run_dir() { return dir_ / "run"; }

  static fs::path dir_;
};

fs::path CliTest::dir_;

}  // namespace

TEST_F(CliTest, TrainWritesArtifacts) {
  for (const char* f : {"model.ckpt", "stage1.ckpt", "vocab.txt", "train_log.jsonl", "train_summary.tsv"}) {
    EXPECT_TRUE(fs::exists(run_dir() / f)) << f;
  }
  EXPECT_EQ(read_jsonl(run_dir() / "train_log.jsonl").size(), 4u);
  const auto h = read_checkpoint_header(run_dir() / "model.ckpt");
  EXPECT_EQ(h.get("input_dim"), "15");
  EXPECT_EQ(h.get("label_set"), "MELD");
}

TEST_F(CliTest, SentenceOnlyFusionNarrowsContextInput) {
  const auto out = dir_ / "ablate";
  ASSERT_EQ(run_cli({"train", "--config", cfg(), "--fusion", "sentence_only", "--out", out.string()}).code, 0);
  EXPECT_EQ(read_checkpoint_header(out / "model.ckpt").get("input_dim"), "8");
}

TEST_F(CliTest, TrainingIsByteDeterministic) {
  const auto a = dir_ / "det_a", b = dir_ / "det_b";
  ASSERT_EQ(run_cli({"train", "--config", cfg(), "--seed", "7", "--out", a.string()}).code, 0);
  ASSERT_EQ(run_cli({"train", "--config", cfg(), "--seed", "7", "--out", b.string()}).code, 0);
  for (const char* f : {"model.ckpt", "stage1.ckpt", "vocab.txt", "train_log.jsonl", "train_summary.tsv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST_F(CliTest, CorpusFileIsNotModified) {
  const auto before = slurp(dir_ / "corpus.jsonl");
  run_cli({"eval", "--config", cfg(), "--split", "dev"});
  EXPECT_EQ(slurp(dir_ / "corpus.jsonl"), before);
}

TEST_F(CliTest, EvalIsIdempotent) {
  ASSERT_EQ(run_cli({"eval", "--config", cfg(), "--split", "test"}).code, 0);
  std::vector<std::string> first;
  for (const char* f : {"eval_test.txt", "eval_test.tsv", "confusion_test.tsv", "predictions_test.jsonl"})
    first.push_back(slurp(run_dir() / f));
  ASSERT_EQ(run_cli({"eval", "--config", cfg(), "--split", "test"}).code, 0);
  std::size_t i = 0;
  for (const char* f : {"eval_test.txt", "eval_test.tsv", "confusion_test.tsv", "predictions_test.jsonl"})
    EXPECT_EQ(slurp(run_dir() / f), first[i++]) << f;
  EXPECT_NE(first[0].find("rows = gold, columns = predicted"), std::string::npos);
}

TEST_F(CliTest, LabelSetMismatchNamesBothSets) {
  const auto r = run_cli({"eval", "--config", cfg(), "--label-set", "iemocap"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("IEMOCAP"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("MELD"), std::string::npos) << r.err;
}

TEST_F(CliTest, DimensionMismatchIsConfigError) {
  auto text = std::string(kConfig);
  text.replace(text.find("\"hidden_dim\": 6"), 15, "\"hidden_dim\": 7");
  spit(dir_ / "other.json", text);
  const auto r = run_cli({"eval", "--config", (dir_ / "other.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("hidden_dim"), std::string::npos);
}

TEST_F(CliTest, PredictEmptyInput) {
  spit(dir_ / "empty.jsonl", "");
  const auto out = dir_ / "empty_out.jsonl";
  const auto r = run_cli({"predict", "--config", cfg(), "--input", (dir_ / "empty.jsonl").string(), "--output", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(out));
  EXPECT_EQ(slurp(out), "");
}

TEST_F(CliTest, PredictAddsLabelsAndSimplexVectors) {
  std::string input;
  input += R"({"dialogue_id":"x","turn_index":1,"speaker":"B","text":"so scared !"})" "\n";
  input += R"({"dialogue_id":"x","turn_index":0,"speaker":"A","text":"what a great day"})" "\n";
  input += R"({"dialogue_id":"y","turn_index":0,"speaker":"A","text":"","label":"joy"})" "\n";
  spit(dir_ / "in.jsonl", input);
  const auto out = dir_ / "out.jsonl";
  ASSERT_EQ(run_cli({"predict", "--config", cfg(), "--input", (dir_ / "in.jsonl").string(), "--output", out.string()}).code, 0);
  const auto recs = read_jsonl(out);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0]["turn_index"], 1);
  EXPECT_EQ(recs[1]["turn_index"], 0);
  EXPECT_EQ(recs[2]["label"], "joy");
  const auto meld = meld_labels();
  for (const auto& r : recs) {
    EXPECT_TRUE(meld.id_of(r["predicted_label"].get<std::string>()).has_value());
    const auto v = r["emotion_vector"].get<std::vector<double>>();
    ASSERT_EQ(v.size(), 7u);
    double s = 0.0;
    for (double x : v) s += x;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST_F(CliTest, PredictAgreesWithEval) {
  ASSERT_EQ(run_cli({"eval", "--config", cfg(), "--split", "dev"}).code, 0);
  const auto in = run_dir() / "predictions_dev.jsonl";
  const auto out = dir_ / "dev_pred.jsonl";
  ASSERT_EQ(run_cli({"predict", "--config", cfg(), "--input", in.string(), "--output", out.string()}).code, 0);
  const auto a = read_jsonl(in), b = read_jsonl(out);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]["predicted_label"], b[i]["predicted_label"]);
    EXPECT_EQ(a[i]["emotion_vector"], b[i]["emotion_vector"]);
  }
}

TEST_F(CliTest, MalformedInputLineIsDataError) {
  spit(dir_ / "bad.jsonl", R"({"dialogue_id":"x","turn_index":0,"speaker":"A","text":"hi"})" "\n{oops\n");
  const auto r = run_cli({"predict", "--config", cfg(), "--input", (dir_ / "bad.jsonl").string(), "--output",
                          (dir_ / "bad_out.jsonl").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, HeatmapSingleUtteranceIsAllHalf) {
  spit(dir_ / "one.jsonl", R"({"dialogue_id":"x","turn_index":0,"speaker":"A","text":"wow"})" "\n");
  const auto out = dir_ / "one.tsv";
  ASSERT_EQ(run_cli({"export-heatmap", "--config", cfg(), "--input", (dir_ / "one.jsonl").string(), "--output", out.string()}).code, 0);
  const auto text = slurp(out);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  std::istringstream row(text);
  double x;
  std::size_t cols = 0;
  while (row >> x) {
    ++cols;
    EXPECT_EQ(x, 0.5);
  }
  EXPECT_EQ(cols, 8u);
}

TEST_F(CliTest, HeatmapValuesInUnitRange) {
  const auto out = dir_ / "many.tsv";
  ASSERT_EQ(run_cli({"export-heatmap", "--config", cfg(), "--input", (dir_ / "corpus.jsonl").string(), "--output", out.string()}).code, 0);
  std::ifstream in(out);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    double x;
    while (ls >> x) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_EQ(rows, 50u);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli({"train", "--config", (dir_ / "missing.json").string()}).code, 2);
  EXPECT_EQ(run_cli({"train", "--config", cfg(), "--fusion", "both"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  spit(dir_ / "unknown.json", R"({"corpus": "corpus.jsonl", "epochs": 3})");
  const auto r = run_cli({"train", "--config", (dir_ / "unknown.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("epochs"), std::string::npos);
  spit(dir_ / "badjson.json", "{");
  EXPECT_EQ(run_cli({"train", "--config", (dir_ / "badjson.json").string()}).code, 2);
}

TEST_F(CliTest, ForeignLabelExitsThree) {
  spit(dir_ / "foreign.jsonl", R"({"dialogue_id":"x","turn_index":0,"speaker":"A","text":"hi","label":"excited"})" "\n");
  auto text = std::string(kConfig);
  text.replace(text.find("corpus.jsonl"), 12, "foreign.jsonl");
  spit(dir_ / "foreign.json", text);
  EXPECT_EQ(run_cli({"train", "--config", (dir_ / "foreign.json").string()}).code, 3);
}

TEST_F(CliTest, DivergentTrainingExitsFour) {
  auto text = std::string(kConfig);
  text.replace(text.find("\"learning_rate\": 0.003"), 22, "\"learning_rate\": 1e300");
  spit(dir_ / "diverge.json", text);
  const auto r = run_cli({"train", "--config", (dir_ / "diverge.json").string(), "--out", (dir_ / "diverge").string()});
  EXPECT_EQ(r.code, 4) << r.err;
}
