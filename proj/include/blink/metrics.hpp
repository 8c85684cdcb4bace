#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "blink/semantics.hpp"

namespace blink {

// Frame-level intent metrics. Precision/recall/F1 are macro-averaged over
// the intent classes present in the ground truth; F1 is the harmonic mean
// of macro precision and macro recall. FP rate = fraction of ground-truth
// {OFF, UNKNOWN} frames predicted as anything else; FN rate = same for
// ground-truth {LEFT_TURN, RIGHT_TURN, FLASHERS}.
struct MetricsReport {
  int64_t frames = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  // Rows = ground truth, columns = prediction.
  std::array<std::array<int64_t, kNumIntent>, kNumIntent> counts{};
  std::array<std::array<double, kNumIntent>, kNumIntent> rows{};  // row-normalized
  std::array<double, kNumIntent> class_precision{};
  std::array<double, kNumIntent> class_recall{};
  std::array<int64_t, kNumIntent> class_count{};  // ground-truth frames per class

  std::string table() const;       // human-readable, confusion in percent
  std::string structured() const;  // line-oriented key/value export
};

MetricsReport compute_metrics(const std::vector<int>& preds,
                              const std::vector<int>& labels);

}  // namespace blink
