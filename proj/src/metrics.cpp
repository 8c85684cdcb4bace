#include "blink/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace blink {

namespace {

bool is_signaling(int c) {
  return c == static_cast<int>(Intent::Left) ||
         c == static_cast<int>(Intent::Right) ||
         c == static_cast<int>(Intent::Flashers);
}

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

}  // namespace

MetricsReport compute_metrics(const std::vector<int>& preds,
                              const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("compute_metrics: preds and labels differ in length");
  if (preds.empty()) throw std::invalid_argument("compute_metrics: empty input");

  MetricsReport r;
  r.frames = static_cast<int64_t>(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], g = labels[i];
    if (p < 0 || p >= kNumIntent || g < 0 || g >= kNumIntent)
      throw std::invalid_argument("compute_metrics: class index out of range");
    ++r.counts[g][p];
  }

  int64_t correct = 0, sig = 0, sig_miss = 0, quiet = 0, quiet_miss = 0;
  for (int g = 0; g < kNumIntent; ++g) {
    int64_t row = 0;
    for (int p = 0; p < kNumIntent; ++p) row += r.counts[g][p];
    r.class_count[g] = row;
    correct += r.counts[g][g];
    if (is_signaling(g)) {
      sig += row;
      sig_miss += row - r.counts[g][g];
    } else {
      quiet += row;
      quiet_miss += row - r.counts[g][g];
    }
    for (int p = 0; p < kNumIntent; ++p)
      r.rows[g][p] = row ? static_cast<double>(r.counts[g][p]) / row : 0.0;
  }
  r.accuracy = static_cast<double>(correct) / r.frames;
  r.fp_rate = quiet ? static_cast<double>(quiet_miss) / quiet : 0.0;
  r.fn_rate = sig ? static_cast<double>(sig_miss) / sig : 0.0;

  int present = 0;
  double psum = 0.0, rsum = 0.0;
  for (int c = 0; c < kNumIntent; ++c) {
    int64_t col = 0;
    for (int g = 0; g < kNumIntent; ++g) col += r.counts[g][c];
    r.class_precision[c] = col ? static_cast<double>(r.counts[c][c]) / col : 0.0;
    r.class_recall[c] =
        r.class_count[c] ? static_cast<double>(r.counts[c][c]) / r.class_count[c] : 0.0;
    if (r.class_count[c]) {
      ++present;
      psum += r.class_precision[c];
      rsum += r.class_recall[c];
    }
  }
  if (present) {
    r.precision = psum / present;
    r.recall = rsum / present;
  }
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

std::string MetricsReport::table() const {
  std::ostringstream out;
  out << "intent metrics (precision/recall macro-averaged)\n";
  out << "  frames     " << frames << "\n";
  out << "  accuracy   " << fixed(100.0 * accuracy, 2) << "%\n";
  out << "  recall     " << fixed(100.0 * recall, 2) << "%\n";
  out << "  precision  " << fixed(100.0 * precision, 2) << "%\n";
  out << "  f1         " << fixed(100.0 * f1, 2) << "%\n";
  out << "  fp rate    " << fixed(100.0 * fp_rate, 2) << "%\n";
  out << "  fn rate    " << fixed(100.0 * fn_rate, 2) << "%\n";
  out << "\nconfusion (rows = truth, cols = predicted, row %)\n";
  out << "  truth\\pred";
  for (int c = 0; c < kNumIntent; ++c)
    out << " " << std::string(11 - std::string(intent_name(static_cast<Intent>(c))).size(), ' ')
        << intent_name(static_cast<Intent>(c));
  out << "\n";
  for (int g = 0; g < kNumIntent; ++g) {
    std::string name = intent_name(static_cast<Intent>(g));
    out << "  " << name << std::string(10 - name.size(), ' ');
    for (int p = 0; p < kNumIntent; ++p) {
      std::string cell = fixed(100.0 * rows[g][p], 2);
      out << " " << std::string(11 - cell.size(), ' ') << cell;
    }
    out << "  (" << class_count[g] << ")\n";
  }
  return out.str();
}

std::string MetricsReport::structured() const {
  std::ostringstream out;
  out << "averaging macro\n";
  out << "frames " << frames << "\n";
  out << "accuracy " << fixed(accuracy, 6) << "\n";
  out << "recall " << fixed(recall, 6) << "\n";
  out << "precision " << fixed(precision, 6) << "\n";
  out << "f1 " << fixed(f1, 6) << "\n";
  out << "fp_rate " << fixed(fp_rate, 6) << "\n";
  out << "fn_rate " << fixed(fn_rate, 6) << "\n";
  for (int c = 0; c < kNumIntent; ++c)
    out << "class " << intent_name(static_cast<Intent>(c)) << " count "
        << class_count[c] << " precision " << fixed(class_precision[c], 6)
        << " recall " << fixed(class_recall[c], 6) << "\n";
  for (int g = 0; g < kNumIntent; ++g) {
    out << "confusion_counts";
    for (int p = 0; p < kNumIntent; ++p) out << " " << counts[g][p];
    out << "\n";
  }
  for (int g = 0; g < kNumIntent; ++g) {
    out << "confusion_row";
    for (int p = 0; p < kNumIntent; ++p) out << " " << fixed(rows[g][p], 6);
    out << "\n";
  }
  return out.str();
}

}  // namespace blink
