#include "emotion/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "emotion/errors.hpp"

namespace emotion {

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truths, std::span<const std::size_t> predictions) {
  if (truths.size() != predictions.size()) {
    throw DimensionError("confusion matrix needs equal-length inputs, got " + std::to_string(truths.size()) +
                         " truths and " + std::to_string(predictions.size()) + " predictions");
  }
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] >= kNumClasses || predictions[i] >= kNumClasses) {
      throw UsageError("unknown class index at example " + std::to_string(i));
    }
    ++m[truths[i]][predictions[i]];
  }
  return m;
}

std::size_t topk_hits(std::span<const std::size_t> truths, std::span<const Ranking> ranked, std::size_t k) {
  if (truths.size() != ranked.size()) {
    throw DimensionError("top-k accuracy needs one ranking per truth");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (ranked[i].size() < k) {
      throw UsageError("k=" + std::to_string(k) + " exceeds ranking length " + std::to_string(ranked[i].size()) +
                       " at example " + std::to_string(i));
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (ranked[i][j] == truths[i]) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

double topk_accuracy(std::span<const std::size_t> truths, std::span<const Ranking> ranked, std::size_t k) {
  const std::size_t hits = topk_hits(truths, ranked, k);
  return truths.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truths.size());
}

EvaluationReport make_report(std::string title, std::string dataset, std::span<const std::size_t> truths,
                             std::span<const Ranking> ranked, std::size_t k) {
  if (k == 0 || k > kNumClasses) throw UsageError("k must lie in [1, 7], got " + std::to_string(k));
  EvaluationReport r;
  r.title = std::move(title);
  r.dataset = std::move(dataset);
  r.n_examples = truths.size();
  r.k = k;
  r.top1_hits = topk_hits(truths, ranked, 1);
  r.topk_hits = topk_hits(truths, ranked, k);
  r.top1_accuracy = topk_accuracy(truths, ranked, 1);
  r.topk_accuracy = topk_accuracy(truths, ranked, k);
  std::vector<std::size_t> predictions;
  predictions.reserve(ranked.size());
  for (const auto& ranking : ranked) predictions.push_back(ranking.front());
  r.confusion = confusion_matrix(truths, predictions);
  return r;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

namespace {

/// Chance level is quoted truncated, not rounded: 1/7 -> 14.28%.
std::string baseline_percent(double fraction) {
  const double truncated = std::floor(fraction * 10000.0 + 1e-9) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", truncated);
  return buf;
}

}  // namespace

std::string render_confusion(const ConfusionMatrix& confusion, const std::string& caption) {
  std::string out = caption + "\n";
  char cell[32];
  std::snprintf(cell, sizeof cell, "%-10s", "");
  out += cell;
  for (auto abbrev : kClassAbbrev) {
    std::snprintf(cell, sizeof cell, "%6s", std::string(abbrev).c_str());
    out += cell;
  }
  out += '\n';
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    std::size_t row_total = 0;
    for (auto v : confusion[t]) row_total += v;
    const std::string label = std::string(kClassAbbrev[t]) + " (" + std::to_string(row_total) + ")";
    std::snprintf(cell, sizeof cell, "%-10s", label.c_str());
    out += cell;
    for (auto v : confusion[t]) {
      std::snprintf(cell, sizeof cell, "%6zu", v);
      out += cell;
    }
    out += '\n';
  }
  return out;
}

std::string render_report(const EvaluationReport& report) {
  std::string out;
  out += report.title + "\n";
  out += "Dataset: " + report.dataset + " (" + std::to_string(report.n_examples) + " " + report.unit + ")\n";
  out += "Baseline (Random Guessing: " + baseline_percent(report.baseline) + ")\n";
  out += "Top-1 accuracy: " + format_percent(report.top1_accuracy) + " (" + std::to_string(report.top1_hits) + "/" +
         std::to_string(report.n_examples) + ")\n";
  if (report.k != 1) {
    out += "Top-" + std::to_string(report.k) + " accuracy: " + format_percent(report.topk_accuracy) + " (" +
           std::to_string(report.topk_hits) + "/" + std::to_string(report.n_examples) + ")\n";
  }
  out += "\n";
  out += render_confusion(report.confusion, "Confusion Matrix for " + report.dataset + " (" +
                                                std::to_string(report.n_examples) + " " + report.unit + ")");
  return out;
}

}  // namespace emotion
