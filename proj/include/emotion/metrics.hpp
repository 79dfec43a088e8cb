#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emotion/dataset.hpp"

namespace emotion {

/// counts[truth][predicted], canonical class order.
using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truths, std::span<const std::size_t> predictions);

/// Classes ordered from most to least likely, one list per example.
using Ranking = std::vector<std::size_t>;

/// Fraction of examples whose truth is among the first k entries of its
/// ranking. Zero examples give 0.
double topk_accuracy(std::span<const std::size_t> truths, std::span<const Ranking> ranked, std::size_t k);
std::size_t topk_hits(std::span<const std::size_t> truths, std::span<const Ranking> ranked, std::size_t k);

struct EvaluationReport {
  std::string title;
  std::string dataset;
  std::string unit = "Images";
  std::size_t n_examples = 0;
  std::size_t k = 2;
  std::size_t top1_hits = 0;
  std::size_t topk_hits = 0;
  double top1_accuracy = 0.0;
  double topk_accuracy = 0.0;
  double baseline = 1.0 / kNumClasses;
  ConfusionMatrix confusion{};
};

/// Builds a report from rankings; the confusion matrix uses each ranking's
/// first entry as the prediction.
EvaluationReport make_report(std::string title, std::string dataset, std::span<const std::size_t> truths,
                             std::span<const Ranking> ranked, std::size_t k);

/// Two-decimal percentage, e.g. 0.67619 -> "67.62%".
std::string format_percent(double fraction);

/// Fixed-width plain-text table. Output depends only on the report fields.
std::string render_report(const EvaluationReport& report);

/// The confusion matrix block alone, rows labelled "AN (15)" etc.
std::string render_confusion(const ConfusionMatrix& confusion, const std::string& caption);

}  // namespace emotion
