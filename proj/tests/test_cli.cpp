#include <gtest/gtest.h>

#include <filesystem>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "emotion/checkpoint.hpp"
#include "emotion/cnn.hpp"
#include "emotion/errors.hpp"
#include "emotion/image.hpp"
#include "emotion/synth.hpp"
#include "temp_dir.hpp"

using namespace emotion;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// A split corpus plus one trained model of each family, shared by the suite.
class CliFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new oracle::TempDir();
    ASSERT_EQ(run({"synth", "--per-class", "2", "--seed", "3", "--out", *dir_ / "corpus"}).code, 0);
    ASSERT_EQ(run({"split", "--manifest", *dir_ / "corpus/manifest.tsv", "--fraction", "0.5", "--out",
                   *dir_ / "split/manifest.tsv"})
                  .code,
              0);
    const Result cnn = run({"train", "cnn", "--manifest", manifest(), "--epochs-per-run", "1", "--runs", "2",
                            "--filters", "2", "--fc-hidden", "8", "--out", *dir_ / "cnn"});
    ASSERT_EQ(cnn.code, 0) << cnn.err;
    const Result rau = run({"train", "rau", "--manifest", manifest(), "--structure", "shallow", "--epochs", "1",
                            "--embed-iterations", "1", "--out", *dir_ / "rau"});
    ASSERT_EQ(rau.code, 0) << rau.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string manifest() { return *dir_ / "split/manifest.tsv"; }
  static std::string path(const std::string& name) { return *dir_ / name; }

  static oracle::TempDir* dir_;
};

oracle::TempDir* CliFixture::dir_ = nullptr;

}  // namespace

TEST(CliConfig, ParsesKeyValueLines) {
  const auto pairs = cli::parse_config_text("# comment\n\n runs = 3 \nlr=0.5\r\n");
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (std::pair<std::string, std::string>{"runs", "3"}));
  EXPECT_EQ(pairs[1], (std::pair<std::string, std::string>{"lr", "0.5"}));
  EXPECT_THROW(cli::parse_config_text("runs 3\n"), UsageError);
  EXPECT_THROW(cli::parse_config_text("=3\n"), UsageError);
}

TEST(CliUsage, HelpAndBadArguments) {
  const Result help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("synth"), std::string::npos);
  EXPECT_EQ(run({"synth", "--per-class", "abc", "--out", "x"}).code, 2);
  EXPECT_EQ(run({"nonsense"}).code, 2);
  EXPECT_EQ(run({"synth"}).code, 2);
}

TEST(CliSynth, DeterministicCorpus) {
  oracle::TempDir a, b;
  const Result r = run({"synth", "--per-class", "3", "--seed", "9", "--out", a.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("wrote 21 images"), std::string::npos);
  EXPECT_NE(r.err.find("# resolved configuration: synth"), std::string::npos);
  ASSERT_EQ(run({"synth", "--per-class", "3", "--seed", "9", "--out", b.path().string()}).code, 0);
  EXPECT_EQ(read_file(a / "manifest.tsv"), read_file(b / "manifest.tsv"));
  const auto m = read_manifest(a / "manifest.tsv");
  for (const auto& rec : m.records) EXPECT_EQ(read_file(m.resolve(rec)), read_file((b.path() / rec.path).string()));
}

TEST(CliSplit, CountsAndInvalidFraction) {
  oracle::TempDir dir;
  ASSERT_EQ(run({"synth", "--per-class", "4", "--out", dir / "c"}).code, 0);
  const Result ok = run({"split", "--manifest", dir / "c/manifest.tsv", "--fraction", "0.75", "--out", dir / "s.tsv"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(ok.out, "train 21\ttest 7\n");
  // Record paths in the new manifest resolve from its own directory.
  const auto m = read_manifest(dir / "s.tsv");
  EXPECT_TRUE(std::filesystem::exists(m.resolve(m.records.front())));
  EXPECT_EQ(run({"split", "--manifest", dir / "c/manifest.tsv", "--fraction", "1.0", "--out", dir / "t.tsv"}).code, 2);
  const Result missing = run({"split", "--manifest", dir / "none.tsv", "--out", dir / "t.tsv"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("none.tsv"), std::string::npos);
}

TEST_F(CliFixture, TrainingWroteModelsAndLogs) {
  EXPECT_TRUE(std::filesystem::exists(path("cnn/cnn.ckpt")));
  EXPECT_EQ(read_file(path("cnn/training_log.tsv")).substr(0, 6), "block\t");
  EXPECT_TRUE(std::filesystem::exists(path("rau/units.bin")));
  EXPECT_TRUE(std::filesystem::exists(path("rau/neutral.ckpt")));
  EXPECT_EQ(read_file(path("rau/training_log.tsv")).substr(0, 6), "class\t");
}

TEST_F(CliFixture, ConfigFileFillsUnsetOptionsAndFlagsWin) {
  write_file(path("cnn.cfg"), "# tiny model\nruns = 2\nfilters=2\nfc-hidden=8\nepochs-per-run=1\n");
  const Result r = run({"train", "cnn", "--config", path("cnn.cfg"), "--manifest", manifest(), "--runs", "1", "--out",
                        path("cfgcnn")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("kept block 1 of 1"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("filters=2"), std::string::npos) << r.err;
  EXPECT_EQ(load_cnn(path("cfgcnn/cnn.ckpt")).config.filters_per_conv, 2u);

  write_file(path("bad.cfg"), "colour=blue\n");
  const Result bad = run({"train", "cnn", "--config", path("bad.cfg"), "--manifest", manifest(), "--out", path("x")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("unknown config key 'colour'"), std::string::npos);
}

TEST_F(CliFixture, EvalPrintsBothCnnReportsAndRauReport) {
  const Result cnn = run({"eval", "--family", "cnn", "--model", path("cnn/cnn.ckpt"), "--manifest", manifest(), "--out",
                          path("report.txt")});
  ASSERT_EQ(cnn.code, 0) << cnn.err;
  EXPECT_NE(cnn.out.find("(7 Images)"), std::string::npos);
  EXPECT_NE(cnn.out.find("(112 Patches)"), std::string::npos);
  EXPECT_NE(cnn.out.find("Top-2 accuracy"), std::string::npos);
  EXPECT_EQ(read_file(path("report.txt")), cnn.out);
  const Result rau = run({"eval", "--family", "rau", "--model", path("rau"), "--manifest", manifest(), "--k", "3"});
  ASSERT_EQ(rau.code, 0) << rau.err;
  EXPECT_NE(rau.out.find("Top-3 accuracy"), std::string::npos);
  EXPECT_NE(rau.out.find("AN (1)"), std::string::npos);
}

TEST_F(CliFixture, EvalErrors) {
  EXPECT_EQ(run({"eval", "--family", "svm", "--model", path("rau"), "--manifest", manifest()}).code, 2);
  const Result missing = run({"eval", "--family", "cnn", "--model", path("nope.ckpt"), "--manifest", manifest()});
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(missing.err.find("nope.ckpt"), std::string::npos);
  const Result unsplit = run({"eval", "--family", "cnn", "--model", path("cnn/cnn.ckpt"), "--manifest",
                              path("corpus/manifest.tsv")});
  EXPECT_EQ(unsplit.code, 2);
}

TEST_F(CliFixture, PredictFormatsAndResizes) {
  const std::string image = path("corpus/images/anger_000.pgm");
  ASSERT_TRUE(std::filesystem::exists(image));
  const std::regex line_format("(anger|sadness|surprise|happiness|disgust|fear|neutral)\t[0-9]+\\.[0-9]{2}%");
  for (const char* family : {"cnn", "rau"}) {
    const std::string model = std::string(family) == "cnn" ? path("cnn/cnn.ckpt") : path("rau");
    const Result r = run({"predict", "--family", family, "--model", model, "--image", image});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      EXPECT_TRUE(std::regex_match(line, line_format)) << line;
      ++count;
    }
    EXPECT_EQ(count, 3);
    EXPECT_EQ(r.out, run({"predict", "--family", family, "--model", model, "--image", image}).out);
  }
  write_file(path("odd.png"), encode_png(resize_bilinear(synth_image(3, 1), 70, 80)));
  const Result odd = run({"predict", "--family", "cnn", "--model", path("cnn/cnn.ckpt"), "--image", path("odd.png"),
                          "--k", "7"});
  ASSERT_EQ(odd.code, 0) << odd.err;
  EXPECT_NE(odd.err.find("notice: resizing 70x80 input to 64x64"), std::string::npos);
  EXPECT_EQ(std::count(odd.out.begin(), odd.out.end(), '\n'), 7);
  EXPECT_EQ(run({"predict", "--family", "cnn", "--model", path("cnn/cnn.ckpt"), "--image", image, "--k", "8"}).code, 2);
}

TEST_F(CliFixture, VizWritesIdenticalFilesAcrossRuns) {
  const std::string image = path("corpus/images/fear_001.pgm");
  for (const char* out : {"viz_a", "viz_b"}) {
    const Result r = run({"viz", "--model", path("cnn/cnn.ckpt"), "--image", image, "--layer", "3", "--out", path(out)});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "wrote 2 filter maps to " + path(out) + "\n");
  }
  for (const char* name : {"layer3_filter01.pgm", "layer3_filter02.pgm"})
    EXPECT_EQ(read_file(path(std::string("viz_a/") + name)), read_file(path(std::string("viz_b/") + name)));
  const Result bad = run({"viz", "--model", path("cnn/cnn.ckpt"), "--image", image, "--layer", "2", "--out",
                          path("viz_c")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("valid conv layers: 1, 3, 5"), std::string::npos);
}
