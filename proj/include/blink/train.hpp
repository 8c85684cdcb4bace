#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "blink/config.hpp"
#include "blink/datagen.hpp"
#include "blink/metrics.hpp"
#include "blink/model.hpp"

namespace blink {

enum class LossMode { Full, IntentOnly, IntentView };
LossMode parse_loss_mode(const std::string& s);
const char* loss_mode_name(LossMode m);

struct GammaWeights {
  double intent = 1.0, left = 1.0, right = 1.0, view = 1.0;
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 1e-4;
  double dropout = 0.5;
  int max_epochs = 50;
  int window = 20;
  int batch = 8;
  int windows_per_epoch = 96;
  double plateau_factor = 0.1;
  int plateau_patience = 5;
  double plateau_threshold = 1e-3;
  GammaWeights gamma;
  LossMode loss_mode = LossMode::Full;
  uint64_t seed = 42;
  bool augment_mirror = true;
  bool augment_jitter = true;
  double augment_brightness = 0.1;
  double augment_contrast = 0.1;
  double early_stop_accuracy = 0.0;  // 0 disables
  int eval_batch = 8;

  static TrainConfig from(const Config& cfg);
};

// Per-frame loss, averaged over frames and batch rows:
//   mean_t,n [ -sum_tasks gamma_task * log p(label) ]  (log clamped at 1e-12)
// Tasks by mode: Full = intent+left+right+view, IntentView drops the light
// heads, IntentOnly keeps intent alone. labels[t][n] pairs with outputs[t]
// row n. When `parts` is given, the per-task means (gamma-weighted) land
// there keyed "intent"/"left"/"right"/"view"; inactive tasks are absent.
template <typename T>
Tensor<T> multitask_loss(const std::vector<FrameOut<T>>& outputs,
                         const std::vector<std::vector<FrameLabels>>& labels,
                         const GammaWeights& gamma, LossMode mode,
                         std::map<std::string, double>* parts = nullptr);

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;  // aligned with the parameter list
  int64_t step = 0;
};

template <typename T>
AdamState<T> init_adam(const std::vector<Tensor<T>>& params);

// Bias-corrected Adam. decay_mask[i] selects parameters whose gradient gets
// the L2 term weight_decay * w added before the moment updates. Missing
// gradients count as zero.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, const std::vector<char>& decay_mask);

// Drops lr by `factor` after `patience` consecutive epochs without improving
// the best loss by more than `threshold`; the counter resets on improvement.
struct PlateauState {
  double lr = 0.0;
  double factor = 0.1;
  int patience = 5;
  double threshold = 1e-3;
  double best = 0.0;
  int bad = 0;
  bool seen = false;

  PlateauState() = default;
  PlateauState(double lr0, double f, int pat, double thr)
      : lr(lr0), factor(f), patience(pat), threshold(thr) {}
  double observe(double val_loss);
};

// One training example: a contiguous frame window in [0,1] planar floats.
struct Window {
  int size = 0;                             // square frame extent
  std::vector<std::vector<float>> frames;   // [T] x [3*size*size]
  std::vector<FrameLabels> labels;          // [T]
};

Window extract_window(const SequenceSample& s, int start, int len);

// Probability-0.5 horizontal mirror (with label swap) plus shared-per-window
// brightness (additive, +-b) and contrast (multiplicative about 0.5, +-c)
// jitter, each gated by its flag.
void augment_window(Window& w, bool mirror, bool jitter, double brightness,
                    double contrast, RngStream& rng);

struct WindowRef {
  int seq = 0;
  int start = 0;
};

// Uniform over intent classes, then uniform over that class's windows
// (windows grouped by their majority intent label). Sequences shorter than
// the window are skipped with a warning.
class StratifiedSampler {
 public:
  StratifiedSampler(const std::vector<SequenceSample>& data, int window,
                    RngStream rng);
  std::vector<WindowRef> next_batch(int batch);

 private:
  std::array<std::vector<WindowRef>, kNumIntent> pools_;
  RngStream rng_;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::map<std::string, double> train_parts;
  double val_loss = 0.0;
  MetricsReport val;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_f1 = 0.0;
  std::string checkpoint;  // empty when no_save
  bool early_stopped = false;
};

struct TrainSinks {
  std::ostream* progress = nullptr;  // one line per epoch
  std::ostream* jsonl = nullptr;     // one structured record per epoch
  bool save_checkpoint = true;
};

// Stratified truncated-window training with Adam and plateau scheduling on
// the validation loss; keeps the checkpoint with the best validation F1 at
// out_prefix + ".ckpt". Divergence aborts with the offending tensor named.
TrainResult train_model(const ModelConfig& mc, const TrainConfig& tc,
                        const std::vector<SequenceSample>& train_set,
                        const std::vector<SequenceSample>& val_set,
                        const std::string& out_prefix, const TrainSinks& sinks);

struct EvalResult {
  MetricsReport metrics;
  double loss = 0.0;
};

EvalResult evaluate_model(const ModelParams<float>& p,
                          const std::vector<SequenceSample>& data,
                          const GammaWeights& gamma, LossMode mode, int batch);

struct AblateRow {
  std::string variant;  // e.g. "attention+full"
  uint64_t seed = 0;
  double accuracy = 0.0, recall = 0.0, f1 = 0.0;
};

struct AblateResult {
  std::vector<AblateRow> rows;
  double median_full_f1 = 0.0;
  double median_intent_only_f1 = 0.0;
  std::string table() const;
};

// Variant grid: multi-seed attention+full and attention+intent_only, plus
// single-seed no_attention+full and attention+intent_view. Scratch
// checkpoints land under out_dir.
AblateResult run_ablation(const Config& cfg,
                          const std::vector<SequenceSample>& train_set,
                          const std::vector<SequenceSample>& val_set,
                          const std::vector<SequenceSample>& test_set,
                          const std::string& out_dir, std::ostream* progress);

}  // namespace blink
