#include "blink/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "blink/image.hpp"
#include "json.hpp"

namespace blink {

LossMode parse_loss_mode(const std::string& s) {
  if (s == "full") return LossMode::Full;
  if (s == "intent_only") return LossMode::IntentOnly;
  if (s == "intent_view") return LossMode::IntentView;
  throw ConfigError("train.loss_mode: unknown mode '" + s + "'");
}

const char* loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::Full: return "full";
    case LossMode::IntentOnly: return "intent_only";
    case LossMode::IntentView: return "intent_view";
  }
  return "?";
}

TrainConfig TrainConfig::from(const Config& cfg) {
  TrainConfig t;
  t.lr = cfg.get_double("train.lr");
  t.beta1 = cfg.get_double("train.beta1");
  t.beta2 = cfg.get_double("train.beta2");
  t.eps = cfg.get_double("train.eps");
  t.weight_decay = cfg.get_double("train.weight_decay");
  t.dropout = cfg.get_double("train.dropout");
  t.max_epochs = cfg.get_int("train.max_epochs");
  t.window = cfg.get_int("train.window");
  t.batch = cfg.get_int("train.batch");
  t.windows_per_epoch = cfg.get_int("train.windows_per_epoch");
  t.plateau_factor = cfg.get_double("train.plateau.factor");
  t.plateau_patience = cfg.get_int("train.plateau.patience");
  t.plateau_threshold = cfg.get_double("train.plateau.threshold");
  t.gamma.intent = cfg.get_double("train.gamma.intent");
  t.gamma.left = cfg.get_double("train.gamma.left");
  t.gamma.right = cfg.get_double("train.gamma.right");
  t.gamma.view = cfg.get_double("train.gamma.view");
  t.loss_mode = parse_loss_mode(cfg.get_string("train.loss_mode"));
  t.seed = cfg.get_u64("train.seed");
  t.augment_mirror = cfg.get_bool("train.augment.mirror");
  t.augment_jitter = cfg.get_bool("train.augment.jitter");
  t.augment_brightness = cfg.get_double("train.augment.brightness");
  t.augment_contrast = cfg.get_double("train.augment.contrast");
  t.early_stop_accuracy = cfg.get_double("train.early_stop_accuracy");
  t.eval_batch = cfg.get_int("eval.batch");
  if (t.lr <= 0) throw ConfigError("train.lr: must be > 0");
  if (t.dropout < 0 || t.dropout >= 1)
    throw ConfigError("train.dropout: must be in [0,1)");
  if (t.max_epochs < 1) throw ConfigError("train.max_epochs: must be >= 1");
  if (t.window < 1) throw ConfigError("train.window: must be >= 1");
  if (t.batch < 1) throw ConfigError("train.batch: must be >= 1");
  if (t.windows_per_epoch < 1)
    throw ConfigError("train.windows_per_epoch: must be >= 1");
  if (t.plateau_patience < 1)
    throw ConfigError("train.plateau.patience: must be >= 1");
  if (t.eval_batch < 1) throw ConfigError("eval.batch: must be >= 1");
  return t;
}

namespace {

template <typename T>
Tensor<T> task_loss(const std::vector<FrameOut<T>>& outs,
                    const std::vector<std::vector<FrameLabels>>& labels,
                    Tensor<T> FrameOut<T>::* head, int label_kind) {
  const int tn = static_cast<int>(outs.size());
  std::vector<Tensor<T>> per_frame;
  per_frame.reserve(tn);
  std::vector<int> flat;
  for (int t = 0; t < tn; ++t) {
    per_frame.push_back(outs[t].*head);
    for (const FrameLabels& l : labels[t]) {
      switch (label_kind) {
        case 0: flat.push_back(static_cast<int>(l.intent)); break;
        case 1: flat.push_back(static_cast<int>(l.left)); break;
        case 2: flat.push_back(static_cast<int>(l.right)); break;
        default: flat.push_back(static_cast<int>(l.view)); break;
      }
    }
  }
  Tensor<T> all = stack0(per_frame);  // [T,N,C]
  const int n = all.dim(1), c = all.dim(2);
  return cross_entropy_mean(reshape(all, {tn * n, c}), flat);
}

}  // namespace

template <typename T>
Tensor<T> multitask_loss(const std::vector<FrameOut<T>>& outputs,
                         const std::vector<std::vector<FrameLabels>>& labels,
                         const GammaWeights& gamma, LossMode mode,
                         std::map<std::string, double>* parts) {
  if (outputs.empty()) throw std::invalid_argument("multitask_loss: no frames");
  if (labels.size() != outputs.size())
    throw std::invalid_argument("multitask_loss: labels/outputs frame count differs");
  const size_t n = static_cast<size_t>(outputs[0].intent.dim(0));
  for (const auto& row : labels)
    if (row.size() != n)
      throw std::invalid_argument("multitask_loss: label row width differs from batch");

  if (parts) parts->clear();
  Tensor<T> total;
  auto accumulate = [&](const char* name, Tensor<T> FrameOut<T>::* head,
                        int kind, double g) {
    Tensor<T> l = scale(task_loss(outputs, labels, head, kind), static_cast<T>(g));
    if (parts) (*parts)[name] = static_cast<double>(l.item());
    total = total.defined() ? add(total, l) : l;
  };
  accumulate("intent", &FrameOut<T>::intent, 0, gamma.intent);
  if (mode == LossMode::Full) {
    accumulate("left", &FrameOut<T>::left, 1, gamma.left);
    accumulate("right", &FrameOut<T>::right, 2, gamma.right);
  }
  if (mode != LossMode::IntentOnly)
    accumulate("view", &FrameOut<T>::view, 3, gamma.view);
  return total;
}

template <typename T>
AdamState<T> init_adam(const std::vector<Tensor<T>>& params) {
  AdamState<T> st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor<T>& p : params) {
    st.m.emplace_back(p.numel(), T(0));
    st.v.emplace_back(p.numel(), T(0));
  }
  return st;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, const std::vector<char>& decay_mask) {
  if (params.size() != state.m.size())
    throw std::invalid_argument("adam_step: state does not match parameter list");
  if (!decay_mask.empty() && decay_mask.size() != params.size())
    throw std::invalid_argument("adam_step: decay mask length mismatch");
  state.step += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    T* w = p.data();
    const T* g = p.has_grad() ? p.grad() : nullptr;
    const bool decay = !decay_mask.empty() && decay_mask[i] && weight_decay != 0.0;
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const int64_t n = p.numel();
    for (int64_t j = 0; j < n; ++j) {
      double gj = g ? static_cast<double>(g[j]) : 0.0;
      if (decay) gj += weight_decay * static_cast<double>(w[j]);
      const double mj = beta1 * m[j] + (1.0 - beta1) * gj;
      const double vj = beta2 * v[j] + (1.0 - beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      w[j] -= static_cast<T>(lr * (mj / c1) / (std::sqrt(vj / c2) + eps));
    }
  }
}

double PlateauState::observe(double val_loss) {
  const bool improved = !seen || val_loss < best - threshold;
  if (!seen || val_loss < best) best = val_loss;
  seen = true;
  if (improved) {
    bad = 0;
  } else if (++bad >= patience) {
    lr *= factor;
    bad = 0;
  }
  return lr;
}

Window extract_window(const SequenceSample& s, int start, int len) {
  const int S = s.spec.canvas;
  if (start < 0 || len < 1 || start + len > s.spec.length)
    throw std::invalid_argument("extract_window: range outside sequence");
  Window w;
  w.size = S;
  w.frames.reserve(len);
  w.labels.reserve(len);
  for (int t = start; t < start + len; ++t) {
    std::vector<float> planes(static_cast<size_t>(3) * S * S);
    u8_to_planes(s.frame(t), S, S, planes.data());
    w.frames.push_back(std::move(planes));
    w.labels.push_back(s.labels[t]);
  }
  return w;
}

namespace {

void mirror_planes(std::vector<float>& planes, int size) {
  for (int c = 0; c < 3; ++c) {
    float* plane = planes.data() + static_cast<size_t>(c) * size * size;
    for (int y = 0; y < size; ++y) {
      float* row = plane + static_cast<size_t>(y) * size;
      std::reverse(row, row + size);
    }
  }
}

}  // namespace

void augment_window(Window& w, bool mirror, bool jitter, double brightness,
                    double contrast, RngStream& rng) {
  if (mirror && rng.bernoulli(0.5)) {
    for (auto& f : w.frames) mirror_planes(f, w.size);
    for (auto& l : w.labels) l = mirror_labels(l);
  }
  if (jitter) {
    const float b = static_cast<float>(rng.uniform(-brightness, brightness));
    const float c = static_cast<float>(1.0 + rng.uniform(-contrast, contrast));
    for (auto& f : w.frames)
      for (float& x : f)
        x = std::clamp((x - 0.5f) * c + 0.5f + b, 0.0f, 1.0f);
  }
}

StratifiedSampler::StratifiedSampler(const std::vector<SequenceSample>& data,
                                     int window, RngStream rng)
    : rng_(rng) {
  for (size_t i = 0; i < data.size(); ++i) {
    const SequenceSample& s = data[i];
    if (s.spec.length < window) {
      std::cerr << "warning: sequence " << i << " has " << s.spec.length
                << " frames, shorter than the " << window
                << "-frame window; skipped\n";
      continue;
    }
    for (int start = 0; start + window <= s.spec.length; ++start) {
      std::array<int, kNumIntent> hist{};
      for (int t = start; t < start + window; ++t)
        ++hist[static_cast<int>(s.labels[t].intent)];
      int maj = 0;
      for (int c = 1; c < kNumIntent; ++c)
        if (hist[c] > hist[maj]) maj = c;
      pools_[maj].push_back({static_cast<int>(i), start});
    }
  }
  for (int c = 0; c < kNumIntent; ++c)
    if (pools_[c].empty())
      throw std::runtime_error(
          std::string("stratified sampling: no windows with majority intent ") +
          intent_name(static_cast<Intent>(c)));
}

std::vector<WindowRef> StratifiedSampler::next_batch(int batch) {
  std::vector<WindowRef> out;
  out.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const int c = static_cast<int>(rng_.uniform_int(0, kNumIntent - 1));
    const auto& pool = pools_[c];
    out.push_back(pool[static_cast<size_t>(
        rng_.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))]);
  }
  return out;
}

namespace {

struct Batch {
  std::vector<Tensor<float>> frames;               // [T] x [B,3,S,S]
  std::vector<std::vector<FrameLabels>> labels;    // [T] x [B]
};

Batch assemble(const std::vector<Window>& ws) {
  const int b = static_cast<int>(ws.size());
  const int t_len = static_cast<int>(ws[0].frames.size());
  const int s = ws[0].size;
  const int64_t plane = static_cast<int64_t>(3) * s * s;
  Batch out;
  out.frames.reserve(t_len);
  out.labels.assign(t_len, {});
  for (int t = 0; t < t_len; ++t) {
    Tensor<float> x({b, 3, s, s});
    for (int n = 0; n < b; ++n) {
      std::copy(ws[n].frames[t].begin(), ws[n].frames[t].end(),
                x.data() + n * plane);
      out.labels[t].push_back(ws[n].labels[t]);
    }
    out.frames.push_back(std::move(x));
  }
  return out;
}

struct FiniteGuard {
  bool prev;
  explicit FiniteGuard(bool on) : prev(finite_checks()) { set_finite_checks(on); }
  ~FiniteGuard() { set_finite_checks(prev); }
};

double median3(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

std::string progress_line(const EpochRecord& r, int max_epochs) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "epoch %3d/%d  lr %.2e  train %.4f  val %.4f  acc %5.1f%%  f1 %.3f",
                r.epoch, max_epochs, r.lr, r.train_loss, r.val_loss,
                100.0 * r.val.accuracy, r.val.f1);
  out << buf;
  return out.str();
}

}  // namespace

TrainResult train_model(const ModelConfig& mc, const TrainConfig& tc,
                        const std::vector<SequenceSample>& train_set,
                        const std::vector<SequenceSample>& val_set,
                        const std::string& out_prefix, const TrainSinks& sinks) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation set");

  RngStream root(tc.seed);
  RngStream init_rng = root.split(1);
  RngStream sampler_rng = root.split(2);
  RngStream augment_rng = root.split(3);
  RngStream dropout_rng = root.split(4);

  ModelParams<float> params = init_model<float>(mc, init_rng);
  params.mark_trainable();
  std::vector<Tensor<float>> plist = params.all();
  AdamState<float> adam = init_adam(plist);
  std::vector<char> decay_mask(plist.size(), 0);
  for (const Tensor<float>& d : params.decayed())
    for (size_t i = 0; i < plist.size(); ++i)
      if (plist[i].impl() == d.impl()) decay_mask[i] = 1;

  StratifiedSampler sampler(train_set, tc.window, sampler_rng);
  PlateauState plateau(tc.lr, tc.plateau_factor, tc.plateau_patience,
                       tc.plateau_threshold);
  FiniteGuard guard(true);

  const int steps = std::max(1, tc.windows_per_epoch / tc.batch);
  TrainResult result;
  result.best_f1 = -1.0;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const double lr_used = plateau.lr;
    double loss_sum = 0.0;
    std::map<std::string, double> part_sum;
    for (int step = 0; step < steps; ++step) {
      std::vector<Window> ws;
      ws.reserve(tc.batch);
      for (const WindowRef& ref : sampler.next_batch(tc.batch)) {
        Window w = extract_window(train_set[ref.seq], ref.start, tc.window);
        augment_window(w, tc.augment_mirror, tc.augment_jitter,
                       tc.augment_brightness, tc.augment_contrast, augment_rng);
        ws.push_back(std::move(w));
      }
      Batch batch = assemble(ws);

      try {
        Tape<float> tape;
        TapeScope<float> scope(tape);
        RunCtx ctx;
        ctx.training = true;
        ctx.dropout_p = tc.dropout;
        ctx.rng = &dropout_rng;
        std::vector<FrameOut<float>> outs = forward_sequence(batch.frames, params, ctx);
        std::map<std::string, double> parts;
        Tensor<float> loss =
            multitask_loss(outs, batch.labels, tc.gamma, tc.loss_mode, &parts);
        const double lv = loss.item();
        if (!std::isfinite(lv))
          throw std::runtime_error("non-finite loss value");
        loss_sum += lv;
        for (auto& [k, v] : parts) part_sum[k] += v;
        for (Tensor<float>& p : plist) p.zero_grad();
        tape.backward(loss);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " +
                                 std::to_string(epoch) + ": " + e.what());
      }
      adam_step(plist, adam, plateau.lr, tc.beta1, tc.beta2, tc.eps,
                tc.weight_decay, decay_mask);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_used;
    rec.train_loss = loss_sum / steps;
    for (auto& [k, v] : part_sum) rec.train_parts[k] = v / steps;

    EvalResult val = evaluate_model(params, val_set, tc.gamma, tc.loss_mode,
                                    tc.eval_batch);
    rec.val_loss = val.loss;
    rec.val = val.metrics;
    plateau.observe(val.loss);

    if (sinks.jsonl) {
      nlohmann::json j;
      j["epoch"] = rec.epoch;
      j["lr"] = rec.lr;
      j["train_loss"] = rec.train_loss;
      for (auto& [k, v] : rec.train_parts) j["train_loss_" + k] = v;
      j["val_loss"] = rec.val_loss;
      j["val_accuracy"] = rec.val.accuracy;
      j["val_recall"] = rec.val.recall;
      j["val_precision"] = rec.val.precision;
      j["val_f1"] = rec.val.f1;
      j["val_fp_rate"] = rec.val.fp_rate;
      j["val_fn_rate"] = rec.val.fn_rate;
      (*sinks.jsonl) << j.dump() << "\n" << std::flush;
    }
    if (sinks.progress)
      (*sinks.progress) << progress_line(rec, tc.max_epochs) << "\n" << std::flush;

    if (rec.val.f1 > result.best_f1) {
      result.best_f1 = rec.val.f1;
      result.best_epoch = epoch;
      if (sinks.save_checkpoint) {
        result.checkpoint = out_prefix + ".ckpt";
        save_model(result.checkpoint, params);
      }
    }
    result.log.push_back(std::move(rec));

    if (tc.early_stop_accuracy > 0.0 &&
        result.log.back().val.accuracy >= tc.early_stop_accuracy) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

EvalResult evaluate_model(const ModelParams<float>& p,
                          const std::vector<SequenceSample>& data,
                          const GammaWeights& gamma, LossMode mode, int batch) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (Tape<float>::current())
    throw std::logic_error("evaluate: must run outside any tape scope");

  std::vector<int> preds, labels;
  double loss_sum = 0.0;
  int64_t frame_count = 0;

  size_t i = 0;
  while (i < data.size()) {
    size_t j = i + 1;
    while (j < data.size() && j - i < static_cast<size_t>(batch) &&
           data[j].spec.length == data[i].spec.length &&
           data[j].spec.canvas == data[i].spec.canvas)
      ++j;
    std::vector<Window> ws;
    ws.reserve(j - i);
    for (size_t k = i; k < j; ++k)
      ws.push_back(extract_window(data[k], 0, data[k].spec.length));
    Batch b = assemble(ws);

    RunCtx ctx;  // inference: no dropout, no rng
    std::vector<FrameOut<float>> outs = forward_sequence(b.frames, p, ctx);
    Tensor<float> loss = multitask_loss(outs, b.labels, gamma, mode);
    const int t_len = static_cast<int>(outs.size());
    const int n = static_cast<int>(ws.size());
    loss_sum += static_cast<double>(loss.item()) * t_len * n;
    frame_count += static_cast<int64_t>(t_len) * n;

    for (int t = 0; t < t_len; ++t) {
      const Tensor<float>& y = outs[t].intent;
      for (int r = 0; r < n; ++r) {
        preds.push_back(argmax_class(y.data() + r * kNumIntent, kNumIntent));
        labels.push_back(static_cast<int>(b.labels[t][r].intent));
      }
    }
    i = j;
  }

  EvalResult out;
  out.metrics = compute_metrics(preds, labels);
  out.loss = loss_sum / static_cast<double>(frame_count);
  return out;
}

std::string AblateResult::table() const {
  std::ostringstream out;
  out << "variant                 seed  accuracy   recall       f1\n";
  for (const AblateRow& r : rows) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-22s %5llu   %6.2f%%  %6.2f%%  %6.4f\n",
                  r.variant.c_str(), static_cast<unsigned long long>(r.seed),
                  100.0 * r.accuracy, 100.0 * r.recall, r.f1);
    out << buf;
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "median f1: attention+full %.4f, attention+intent_only %.4f\n",
                median_full_f1, median_intent_only_f1);
  out << buf;
  return out.str();
}

AblateResult run_ablation(const Config& cfg,
                          const std::vector<SequenceSample>& train_set,
                          const std::vector<SequenceSample>& val_set,
                          const std::vector<SequenceSample>& test_set,
                          const std::string& out_dir, std::ostream* progress) {
  const ModelConfig base_mc = ModelConfig::from(cfg);
  TrainConfig base_tc = TrainConfig::from(cfg);
  base_tc.max_epochs = cfg.get_int("ablate.epochs");
  base_tc.windows_per_epoch = cfg.get_int("ablate.windows_per_epoch");
  base_tc.window = cfg.get_int("ablate.window");
  base_tc.batch = cfg.get_int("ablate.batch");
  base_tc.early_stop_accuracy = 0.0;
  const std::vector<int> seeds = cfg.get_int_list("ablate.seeds");
  if (seeds.empty()) throw ConfigError("ablate.seeds: empty");

  AblateResult result;
  int run_id = 0;
  auto run_one = [&](const std::string& variant, bool attention, LossMode mode,
                     uint64_t seed) {
    ModelConfig mc = base_mc;
    mc.attention_enabled = attention;
    TrainConfig tc = base_tc;
    tc.loss_mode = mode;
    tc.seed = seed;
    if (progress)
      (*progress) << "[ablate] " << variant << " seed " << seed << "\n"
                  << std::flush;
    TrainSinks sinks;
    sinks.progress = progress;
    const std::string prefix =
        out_dir + "/ablate_run" + std::to_string(run_id++);
    TrainResult tr = train_model(mc, tc, train_set, val_set, prefix, sinks);
    ModelParams<float> best = load_model(tr.checkpoint);
    EvalResult ev = evaluate_model(best, test_set, tc.gamma, tc.loss_mode,
                                   tc.eval_batch);
    result.rows.push_back({variant, seed, ev.metrics.accuracy,
                           ev.metrics.recall, ev.metrics.f1});
    return ev.metrics.f1;
  };

  std::vector<double> full_f1, intent_f1;
  for (int s : seeds)
    full_f1.push_back(run_one("attention+full", true, LossMode::Full,
                              static_cast<uint64_t>(s)));
  for (int s : seeds)
    intent_f1.push_back(run_one("attention+intent_only", true,
                                LossMode::IntentOnly, static_cast<uint64_t>(s)));
  run_one("no_attention+full", false, LossMode::Full,
          static_cast<uint64_t>(seeds[0]));
  run_one("attention+intent_view", true, LossMode::IntentView,
          static_cast<uint64_t>(seeds[0]));

  result.median_full_f1 = median3(full_f1);
  result.median_intent_only_f1 = median3(intent_f1);
  return result;
}

#define BLINK_INSTANTIATE_TRAIN(T)                                             \
  template Tensor<T> multitask_loss<T>(                                        \
      const std::vector<FrameOut<T>>&,                                         \
      const std::vector<std::vector<FrameLabels>>&, const GammaWeights&,       \
      LossMode, std::map<std::string, double>*);                               \
  template AdamState<T> init_adam<T>(const std::vector<Tensor<T>>&);           \
  template void adam_step<T>(std::vector<Tensor<T>>&, AdamState<T>&,     \
                             double, double, double, double, double,           \
                             const std::vector<char>&);

BLINK_INSTANTIATE_TRAIN(float)
BLINK_INSTANTIATE_TRAIN(double)

}  // namespace blink
