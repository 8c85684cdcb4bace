#pragma once

#include <string>
#include <utility>
#include <vector>

#include "blink/config.hpp"
#include "blink/convlstm.hpp"
#include "blink/ops.hpp"

namespace blink {

struct ModelConfig {
  std::string preset = "desk";
  int input_size = 64;
  bool attention_enabled = true;
  std::vector<int> att_channels{4, 6, 6, 1};
  std::vector<int> att_dilations{1, 2, 2, 1};
  std::vector<std::vector<int>> blocks{{16}, {24}, {32}, {64}};  // pool after each
  int lstm_layers = 2;
  int lstm_channels = 32;
  int lstm_kernel = 3;
  bool conv_peephole = false;
  int trunk = 128;
  std::string normalize = "unit";  // pixel mapping [0,255] -> [0,1]

  static ModelConfig from(const Config& cfg);
  void validate() const;  // ConfigError naming the offending field
  int feature_hw() const { return input_size >> static_cast<int>(blocks.size()); }
  int feature_ch() const { return blocks.back().back(); }
  int head_input() const { return lstm_channels * feature_hw() * feature_hw(); }

  // Flat key/value record; parse_text is the exact inverse.
  std::string text() const;
  static ModelConfig parse_text(const std::string& text);
};

template <typename T>
struct FrameOut {
  Tensor<T> intent, left, right, view;  // [N, classes] distributions
  Tensor<T> mask;                       // [N,1,S,S]; undefined with attention off
};

// Forward-pass behavior knobs.
struct RunCtx {
  bool training = false;
  double dropout_p = 0.0;
  RngStream* rng = nullptr;
};

template <typename T>
struct ModelParams {
  ModelConfig cfg;
  std::vector<Tensor<T>> att_w, att_b;  // empty when attention disabled
  std::vector<Tensor<T>> bb_w, bb_b;    // flat conv list; block bounds from cfg
  std::vector<ConvLSTMLayer<T>> lstm;
  Tensor<T> trunk_w, trunk_b;
  Tensor<T> head_intent_w, head_intent_b;
  Tensor<T> head_left_w, head_left_b;
  Tensor<T> head_right_w, head_right_b;
  Tensor<T> head_view_w, head_view_b;

  std::vector<std::pair<std::string, Tensor<T>>> named() const;
  std::vector<Tensor<T>> all() const;      // stable order, matches named()
  std::vector<Tensor<T>> decayed() const;  // dense weights, the L2 set
  int64_t param_count() const;
  void mark_trainable() const;  // requires_grad on every parameter
};

template <typename T>
ModelParams<T> init_model(const ModelConfig& cfg, RngStream& rng);

// (masked roi, mask)
template <typename T>
std::pair<Tensor<T>, Tensor<T>> attention_apply(const Tensor<T>& roi,
                                                const ModelParams<T>& p);

template <typename T>
Tensor<T> backbone_features(const Tensor<T>& x, const ModelParams<T>& p);

template <typename T>
FrameOut<T> heads_apply(const Tensor<T>& h, const ModelParams<T>& p,
                        const RunCtx& ctx);

// frames: one [N,3,S,S] tensor per time step.
template <typename T>
std::vector<FrameOut<T>> forward_sequence(const std::vector<Tensor<T>>& frames,
                                          const ModelParams<T>& p,
                                          const RunCtx& ctx);

// Stateful frame-at-a-time pipeline; recurrent state persists across step()
// calls until reset().
template <typename T>
class InferenceSession {
 public:
  explicit InferenceSession(ModelParams<T> params);
  FrameOut<T> step(const Tensor<T>& frame);
  void reset();
  const ModelParams<T>& params() const { return p_; }

 private:
  ModelParams<T> p_;
  std::vector<CellState<T>> states_;
  bool started_ = false;
};

// Checkpoint container + config sidecar at path + ".config".
void save_model(const std::string& path, const ModelParams<float>& p);
ModelParams<float> load_model(const std::string& path);

ModelParams<double> to_double(const ModelParams<float>& p);

}  // namespace blink
