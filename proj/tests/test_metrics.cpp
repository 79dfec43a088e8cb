#include <gtest/gtest.h>

#include "emotion/errors.hpp"
#include "emotion/metrics.hpp"
#include "emotion/rng.hpp"
#include "oracle.hpp"

using namespace emotion;

namespace {

using Table = std::array<std::array<std::size_t, 7>, 7>;

/// Rankings whose first entry is the given prediction, the rest ascending.
std::vector<Ranking> rankings_from(const std::vector<std::size_t>& predictions) {
  std::vector<Ranking> out;
  for (std::size_t p : predictions) {
    Ranking r{p};
    for (std::size_t c = 0; c < 7; ++c)
      if (c != p) r.push_back(c);
    out.push_back(r);
  }
  return out;
}

EvaluationReport report_for(const Table& table, const std::string& dataset) {
  std::vector<std::size_t> truths, predictions;
  oracle::expand_confusion(table, truths, predictions);
  return make_report("Convolutional Neural Network", dataset, truths, rankings_from(predictions), 1);
}

std::size_t trace(const ConfusionMatrix& m) {
  std::size_t t = 0;
  for (std::size_t i = 0; i < 7; ++i) t += m[i][i];
  return t;
}

}  // namespace

TEST(Confusion, ReproducesJaffeTable) {
  std::vector<std::size_t> truths, predictions;
  oracle::expand_confusion(oracle::kJaffeConfusion, truths, predictions);
  const ConfusionMatrix m = confusion_matrix(truths, predictions);
  EXPECT_EQ(m[1], (std::array<std::size_t, 7>{2, 104, 3, 8, 2, 7, 4}));
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t p = 0; p < 7; ++p) EXPECT_EQ(m[t][p], oracle::kJaffeConfusion[t][p]);
  EXPECT_EQ(truths.size(), 852u);
  EXPECT_EQ(trace(m), 736u);
  EXPECT_EQ(format_percent(736.0 / 852.0), "86.38%");
}

TEST(Confusion, ReproducesLfwTable) {
  const EvaluationReport r = report_for(oracle::kLfwConfusion, "LFW Test Set");
  EXPECT_EQ(r.n_examples, 105u);
  EXPECT_EQ(r.top1_hits, 71u);
  EXPECT_EQ(format_percent(r.top1_accuracy), "67.62%");
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t p = 0; p < 7; ++p) EXPECT_EQ(r.confusion[t][p], oracle::kLfwConfusion[t][p]);
}

TEST(Confusion, RejectsBadInput) {
  const std::vector<std::size_t> a{0, 1}, b{0};
  EXPECT_THROW(confusion_matrix(a, b), DimensionError);
  const std::vector<std::size_t> bad{7};
  EXPECT_THROW(confusion_matrix(bad, bad), UsageError);
}

TEST(Confusion, RowSumsAndTraceMatchCounts) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng.below(200);
    std::vector<std::size_t> truths(n), predictions(n);
    std::array<std::size_t, 7> per_class{};
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      truths[i] = rng.below(7);
      predictions[i] = rng.below(7);
      ++per_class[truths[i]];
      correct += truths[i] == predictions[i];
    }
    const ConfusionMatrix m = confusion_matrix(truths, predictions);
    std::size_t total = 0;
    for (std::size_t t = 0; t < 7; ++t) {
      std::size_t row = 0;
      for (auto v : m[t]) row += v;
      EXPECT_EQ(row, per_class[t]);
      total += row;
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(trace(m), correct);
    const auto r = make_report("t", "d", truths, rankings_from(predictions), 2);
    if (n > 0) {
      EXPECT_DOUBLE_EQ(r.top1_accuracy, double(correct) / double(n));
    }
  }
}

TEST(Percent, ReferenceFigures) {
  EXPECT_EQ(format_percent(29.0 / 54.0), "53.70%");
  EXPECT_EQ(format_percent(25.0 / 54.0), "46.30%");
  EXPECT_EQ(format_percent(71.0 / 105.0), "67.62%");
  EXPECT_EQ(format_percent(0.0), "0.00%");
  EXPECT_EQ(format_percent(1.0), "100.00%");
}

TEST(TopK, HandExample) {
  const std::vector<std::size_t> truths{0, 1, 2};
  const std::vector<Ranking> ranked{{0, 1, 2, 3, 4, 5, 6}, {2, 1, 0, 3, 4, 5, 6}, {6, 5, 4, 3, 1, 0, 2}};
  EXPECT_EQ(topk_hits(truths, ranked, 1), 1u);
  EXPECT_EQ(topk_hits(truths, ranked, 2), 2u);
  EXPECT_EQ(topk_hits(truths, ranked, 6), 2u);
  EXPECT_EQ(topk_hits(truths, ranked, 7), 3u);
  EXPECT_DOUBLE_EQ(topk_accuracy(truths, ranked, 2), 2.0 / 3.0);
  EXPECT_THROW(topk_hits(truths, ranked, 8), UsageError);
  EXPECT_THROW(topk_hits(truths, std::vector<Ranking>{}, 1), DimensionError);
  EXPECT_EQ(topk_accuracy({}, {}, 3), 0.0);
}

TEST(TopK, MonotoneInKAndFullAtSeven) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<std::size_t> truths(n);
    std::vector<Ranking> ranked(n);
    for (std::size_t i = 0; i < n; ++i) {
      truths[i] = rng.below(7);
      Ranking r{0, 1, 2, 3, 4, 5, 6};
      rng.shuffle(std::span<std::size_t>(r));
      ranked[i] = r;
    }
    double prev = 0;
    for (std::size_t k = 1; k <= 7; ++k) {
      const double acc = topk_accuracy(truths, ranked, k);
      EXPECT_GE(acc, prev);
      prev = acc;
    }
    EXPECT_EQ(prev, 1.0);
  }
}

TEST(Report, GoldenLfwRendering) {
  const std::string expected =
      "Convolutional Neural Network\n"
      "Dataset: LFW Test Set (105 Images)\n"
      "Baseline (Random Guessing: 14.28%)\n"
      "Top-1 accuracy: 67.62% (71/105)\n"
      "\n"
      "Confusion Matrix for LFW Test Set (105 Images)\n"
      "              AN    SA    SU    HA    DI    FE    NE\n"
      "AN (15)        4     2     0     1     3     1     4\n"
      "SA (21)        0    20     0     0     1     0     0\n"
      "SU (8)         0     1     6     0     0     1     0\n"
      "HA (29)        1     3     0    24     1     0     0\n"
      "DI (9)         1     0     1     0     7     0     0\n"
      "FE (6)         1     0     0     0     1     4     0\n"
      "NE (17)        1     4     1     2     0     3     6\n";
  EXPECT_EQ(render_report(report_for(oracle::kLfwConfusion, "LFW Test Set")), expected);
}

TEST(Report, TopKLineAndDeterminism) {
  std::vector<std::size_t> truths, predictions;
  oracle::expand_confusion(oracle::kJaffeConfusion, truths, predictions);
  const auto r = make_report("CNN", "JAFFE Test Set", truths, rankings_from(predictions), 2);
  const std::string text = render_report(r);
  EXPECT_NE(text.find("Top-2 accuracy: "), std::string::npos);
  EXPECT_NE(text.find("Dataset: JAFFE Test Set (852 Images)"), std::string::npos);
  EXPECT_NE(text.find("SA (130)"), std::string::npos);
  EXPECT_EQ(text, render_report(r));
  EXPECT_THROW(make_report("t", "d", truths, rankings_from(predictions), 0), UsageError);
}

TEST(Report, EmptyReportRenders) {
  const auto r = make_report("RAU", "empty", {}, {}, 2);
  const std::string text = render_report(r);
  EXPECT_NE(text.find("Top-1 accuracy: 0.00% (0/0)"), std::string::npos);
  EXPECT_NE(text.find("AN (0)"), std::string::npos);
}
