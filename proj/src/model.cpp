#include "blink/model.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>

#include "blink/binio.hpp"
#include "blink/checkpoint.hpp"
#include "blink/semantics.hpp"

namespace blink {

namespace {

std::vector<int> parse_int_csv(const std::string& text, const std::string& field) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(field + ": bad integer '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(field + ": empty list");
  return out;
}

std::vector<std::vector<int>> parse_blocks(const std::string& text) {
  std::vector<std::vector<int>> out;
  std::string block;
  std::istringstream in(text);
  while (std::getline(in, block, ';'))
    out.push_back(parse_int_csv(block, "model.backbone.blocks"));
  if (out.empty()) throw ConfigError("model.backbone.blocks: empty");
  return out;
}

std::string join_csv(const std::vector<int>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_blocks(const std::vector<std::vector<int>>& bs) {
  std::string out;
  for (size_t i = 0; i < bs.size(); ++i) {
    if (i) out += ';';
    out += join_csv(bs[i]);
  }
  return out;
}

}  // namespace

ModelConfig ModelConfig::from(const Config& cfg) {
  ModelConfig m;
  m.preset = cfg.get_string("model.preset");
  m.input_size = cfg.get_int("model.input_size");
  m.normalize = cfg.get_string("model.normalize");
  m.attention_enabled = cfg.get_bool("model.attention.enabled");
  m.att_channels = cfg.get_int_list("model.attention.channels");
  m.att_dilations = cfg.get_int_list("model.attention.dilations");
  m.blocks = parse_blocks(cfg.get_string("model.backbone.blocks"));
  m.lstm_layers = cfg.get_int("model.lstm.layers");
  m.lstm_channels = cfg.get_int("model.lstm.channels");
  m.lstm_kernel = cfg.get_int("model.lstm.kernel");
  m.conv_peephole = cfg.get_bool("model.lstm.conv_peephole");
  m.trunk = cfg.get_int("model.trunk");
  m.validate();
  return m;
}

void ModelConfig::validate() const {
  if (input_size < 8) throw ConfigError("model.input_size: must be >= 8");
  int hw = input_size;
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty()) throw ConfigError("model.backbone.blocks: empty block");
    for (int c : blocks[b])
      if (c < 1) throw ConfigError("model.backbone.blocks: channels must be >= 1");
    if (hw % 2) throw ConfigError("model.input_size: not divisible by 2 per block");
    hw /= 2;
  }
  if (hw < 1) throw ConfigError("model.backbone.blocks: too many blocks for input size");
  if (att_channels.empty() || att_channels.back() != 1)
    throw ConfigError("model.attention.channels: last entry must be 1");
  if (att_dilations.size() != att_channels.size())
    throw ConfigError("model.attention.dilations: length must match channels");
  for (int d : att_dilations)
    if (d < 1) throw ConfigError("model.attention.dilations: must be >= 1");
  for (int c : att_channels)
    if (c < 1) throw ConfigError("model.attention.channels: must be >= 1");
  if (lstm_layers < 1) throw ConfigError("model.lstm.layers: must be >= 1");
  if (lstm_channels < 1) throw ConfigError("model.lstm.channels: must be >= 1");
  if (lstm_kernel < 1 || lstm_kernel % 2 == 0)
    throw ConfigError("model.lstm.kernel: must be odd and >= 1");
  if (trunk < 1) throw ConfigError("model.trunk: must be >= 1");
  if (normalize != "unit") throw ConfigError("model.normalize: unsupported mode");
}

std::string ModelConfig::text() const {
  std::ostringstream out;
  out << "preset " << preset << "\n";
  out << "input_size " << input_size << "\n";
  out << "normalize " << normalize << "\n";
  out << "attention.enabled " << (attention_enabled ? "true" : "false") << "\n";
  out << "attention.channels " << join_csv(att_channels) << "\n";
  out << "attention.dilations " << join_csv(att_dilations) << "\n";
  out << "backbone.blocks " << join_blocks(blocks) << "\n";
  out << "lstm.layers " << lstm_layers << "\n";
  out << "lstm.channels " << lstm_channels << "\n";
  out << "lstm.kernel " << lstm_kernel << "\n";
  out << "lstm.conv_peephole " << (conv_peephole ? "true" : "false") << "\n";
  out << "trunk " << trunk << "\n";
  return out.str();
}

ModelConfig ModelConfig::parse_text(const std::string& text) {
  ModelConfig m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto bad = [&](const std::string& msg) {
    return ConfigError("model record:" + std::to_string(lineno) + ": " + msg);
  };
  auto to_int = [&](const std::string& v) {
    try {
      size_t used = 0;
      int x = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw bad("bad integer '" + v + "'");
    }
  };
  auto to_bool = [&](const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw bad("bad bool '" + v + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos) throw bad("expected 'key value'");
    const std::string key = line.substr(0, sp);
    const std::string val = line.substr(sp + 1);
    if (key == "preset") m.preset = val;
    else if (key == "input_size") m.input_size = to_int(val);
    else if (key == "normalize") m.normalize = val;
    else if (key == "attention.enabled") m.attention_enabled = to_bool(val);
    else if (key == "attention.channels") m.att_channels = parse_int_csv(val, key);
    else if (key == "attention.dilations") m.att_dilations = parse_int_csv(val, key);
    else if (key == "backbone.blocks") m.blocks = parse_blocks(val);
    else if (key == "lstm.layers") m.lstm_layers = to_int(val);
    else if (key == "lstm.channels") m.lstm_channels = to_int(val);
    else if (key == "lstm.kernel") m.lstm_kernel = to_int(val);
    else if (key == "lstm.conv_peephole") m.conv_peephole = to_bool(val);
    else if (key == "trunk") m.trunk = to_int(val);
    else throw bad("unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> ModelParams<T>::named() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (size_t i = 0; i < att_w.size(); ++i) {
    const std::string base = "attention.conv" + std::to_string(i);
    out.emplace_back(base + ".weight", att_w[i]);
    out.emplace_back(base + ".bias", att_b[i]);
  }
  size_t k = 0;
  for (size_t b = 0; b < cfg.blocks.size(); ++b)
    for (size_t j = 0; j < cfg.blocks[b].size(); ++j, ++k) {
      const std::string base =
          "backbone.block" + std::to_string(b) + ".conv" + std::to_string(j);
      out.emplace_back(base + ".weight", bb_w[k]);
      out.emplace_back(base + ".bias", bb_b[k]);
    }
  for (size_t l = 0; l < lstm.size(); ++l) {
    const std::string base = "convlstm.layer" + std::to_string(l) + ".";
    const ConvLSTMLayer<T>& y = lstm[l];
    out.emplace_back(base + "i.x_kernel", y.wxi);
    out.emplace_back(base + "i.h_kernel", y.whi);
    out.emplace_back(base + "i.bias", y.bi);
    out.emplace_back(base + "i.peephole", y.wci);
    out.emplace_back(base + "f.x_kernel", y.wxf);
    out.emplace_back(base + "f.h_kernel", y.whf);
    out.emplace_back(base + "f.bias", y.bf);
    out.emplace_back(base + "f.peephole", y.wcf);
    out.emplace_back(base + "c.x_kernel", y.wxc);
    out.emplace_back(base + "c.h_kernel", y.whc);
    out.emplace_back(base + "c.bias", y.bc);
    out.emplace_back(base + "o.x_kernel", y.wxo);
    out.emplace_back(base + "o.h_kernel", y.who);
    out.emplace_back(base + "o.bias", y.bo);
    out.emplace_back(base + "o.peephole", y.wco);
  }
  out.emplace_back("heads.trunk.weight", trunk_w);
  out.emplace_back("heads.trunk.bias", trunk_b);
  out.emplace_back("heads.intent.weight", head_intent_w);
  out.emplace_back("heads.intent.bias", head_intent_b);
  out.emplace_back("heads.left.weight", head_left_w);
  out.emplace_back("heads.left.bias", head_left_b);
  out.emplace_back("heads.right.weight", head_right_w);
  out.emplace_back("heads.right.bias", head_right_b);
  out.emplace_back("heads.view.weight", head_view_w);
  out.emplace_back("heads.view.bias", head_view_b);
  return out;
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::all() const {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::decayed() const {
  return {trunk_w, head_intent_w, head_left_w, head_right_w, head_view_w};
}

template <typename T>
int64_t ModelParams<T>::param_count() const {
  int64_t n = 0;
  for (const Tensor<T>& t : all()) n += t.numel();
  return n;
}

template <typename T>
void ModelParams<T>::mark_trainable() const {
  for (Tensor<T>& t : all()) t.set_requires_grad(true);
}

namespace {

template <typename T>
Tensor<T> conv_kernel(int out_ch, int in_ch, int k, RngStream& rng) {
  return glorot_tensor<T>({out_ch, in_ch, k, k}, in_ch * k * k, out_ch * k * k, rng);
}

}  // namespace

template <typename T>
ModelParams<T> init_model(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  ModelParams<T> p;
  p.cfg = cfg;

  if (cfg.attention_enabled) {
    RngStream r = rng.split(1);
    int in_ch = 3;
    for (size_t i = 0; i < cfg.att_channels.size(); ++i) {
      RngStream ri = r.split(static_cast<uint64_t>(i));
      const int out_ch = cfg.att_channels[i];
      p.att_w.push_back(conv_kernel<T>(out_ch, in_ch, 3, ri));
      p.att_b.push_back(Tensor<T>::zeros({out_ch}));
      in_ch = out_ch;
    }
  }

  {
    RngStream r = rng.split(2);
    int in_ch = 3;
    uint64_t k = 0;
    for (const auto& block : cfg.blocks)
      for (int out_ch : block) {
        RngStream ri = r.split(k++);
        p.bb_w.push_back(conv_kernel<T>(out_ch, in_ch, 3, ri));
        p.bb_b.push_back(Tensor<T>::zeros({out_ch}));
        in_ch = out_ch;
      }
  }

  {
    RngStream r = rng.split(3);
    int in_ch = cfg.feature_ch();
    for (int l = 0; l < cfg.lstm_layers; ++l) {
      RngStream rl = r.split(static_cast<uint64_t>(l));
      p.lstm.push_back(init_convlstm<T>(in_ch, cfg.lstm_channels, cfg.lstm_kernel,
                                        cfg.conv_peephole, rl));
      in_ch = cfg.lstm_channels;
    }
  }

  {
    RngStream r = rng.split(4);
    const int d = cfg.head_input();
    RngStream r0 = r.split(0);
    p.trunk_w = glorot_tensor<T>({d, cfg.trunk}, d, cfg.trunk, r0);
    p.trunk_b = Tensor<T>::zeros({cfg.trunk});
    auto head = [&](uint64_t id, int classes, Tensor<T>& w, Tensor<T>& b) {
      RngStream rh = r.split(id);
      w = glorot_tensor<T>({cfg.trunk, classes}, cfg.trunk, classes, rh);
      b = Tensor<T>::zeros({classes});
    };
    head(1, kNumIntent, p.head_intent_w, p.head_intent_b);
    head(2, kNumLight, p.head_left_w, p.head_left_b);
    head(3, kNumLight, p.head_right_w, p.head_right_b);
    head(4, kNumView, p.head_view_w, p.head_view_b);
  }

  return p;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> attention_apply(const Tensor<T>& roi,
                                                const ModelParams<T>& p) {
  if (!p.cfg.attention_enabled)
    throw std::logic_error("attention_apply: attention disabled");
  Tensor<T> z = roi;
  const size_t n = p.att_w.size();
  for (size_t i = 0; i < n; ++i) {
    z = conv2d(z, p.att_w[i], p.att_b[i], 1, p.cfg.att_dilations[i], Padding::Same);
    z = (i + 1 < n) ? relu(z) : sigmoid(z);
  }
  return {mask_mul(roi, z), z};
}

template <typename T>
Tensor<T> backbone_features(const Tensor<T>& x, const ModelParams<T>& p) {
  Tensor<T> z = x;
  size_t k = 0;
  for (const auto& block : p.cfg.blocks) {
    for (size_t j = 0; j < block.size(); ++j, ++k)
      z = relu(conv2d(z, p.bb_w[k], p.bb_b[k], 1, 1, Padding::Same));
    z = maxpool2(z);
  }
  return z;
}

template <typename T>
FrameOut<T> heads_apply(const Tensor<T>& h, const ModelParams<T>& p,
                        const RunCtx& ctx) {
  RngStream dummy(0);
  RngStream& rng = ctx.rng ? *ctx.rng : dummy;
  Tensor<T> flat = reshape(h, {h.dim(0), p.cfg.head_input()});
  Tensor<T> z = relu(dense(flat, p.trunk_w, p.trunk_b));
  z = dropout(z, ctx.dropout_p, ctx.training, rng);
  FrameOut<T> out;
  out.intent = softmax_last(dense(z, p.head_intent_w, p.head_intent_b));
  out.left = softmax_last(dense(z, p.head_left_w, p.head_left_b));
  out.right = softmax_last(dense(z, p.head_right_w, p.head_right_b));
  out.view = softmax_last(dense(z, p.head_view_w, p.head_view_b));
  return out;
}

template <typename T>
std::vector<FrameOut<T>> forward_sequence(const std::vector<Tensor<T>>& frames,
                                          const ModelParams<T>& p,
                                          const RunCtx& ctx) {
  if (frames.empty()) throw std::invalid_argument("forward_sequence: no frames");
  RngStream dummy(0);
  RngStream& rng = ctx.rng ? *ctx.rng : dummy;
  std::vector<Tensor<T>> feats;
  std::vector<Tensor<T>> masks(frames.size());
  feats.reserve(frames.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    Tensor<T> x = frames[t];
    if (p.cfg.attention_enabled) {
      auto [masked, mask] = attention_apply(x, p);
      x = masked;
      masks[t] = mask;
    }
    feats.push_back(backbone_features(x, p));
  }
  std::vector<Tensor<T>> hs =
      stack_forward(feats, p.lstm, ctx.dropout_p, ctx.training, rng);
  std::vector<FrameOut<T>> out;
  out.reserve(hs.size());
  for (size_t t = 0; t < hs.size(); ++t) {
    out.push_back(heads_apply(hs[t], p, ctx));
    out.back().mask = masks[t];
  }
  return out;
}

template <typename T>
InferenceSession<T>::InferenceSession(ModelParams<T> params) : p_(std::move(params)) {}

template <typename T>
void InferenceSession<T>::reset() {
  states_.clear();
  started_ = false;
}

template <typename T>
FrameOut<T> InferenceSession<T>::step(const Tensor<T>& frame) {
  RngStream dummy(0);
  Tensor<T> x = frame;
  Tensor<T> mask;
  if (p_.cfg.attention_enabled) {
    auto [masked, m] = attention_apply(x, p_);
    x = masked;
    mask = m;
  }
  Tensor<T> feat = backbone_features(x, p_);
  if (!started_) {
    const int batch = feat.dim(0), hw = feat.dim(2);
    states_.clear();
    for (size_t l = 0; l < p_.lstm.size(); ++l)
      states_.push_back(init_state<T>(batch, p_.cfg.lstm_channels, hw, hw));
    started_ = true;
  }
  Tensor<T> z = feat;
  for (size_t l = 0; l < p_.lstm.size(); ++l) {
    states_[l] = cell_step(z, states_[l], p_.lstm[l], 0.0, false, dummy);
    z = states_[l].h;
  }
  RunCtx ctx;
  FrameOut<T> out = heads_apply(z, p_, ctx);
  out.mask = mask;
  return out;
}

void save_model(const std::string& path, const ModelParams<float>& p) {
  write_checkpoint(path, p.named());
  write_text_atomic(path + ".config", p.cfg.text());
}

ModelParams<float> load_model(const std::string& path) {
  const ModelConfig cfg = ModelConfig::parse_text(read_text_file(path + ".config"));
  RngStream rng(0);
  ModelParams<float> p = init_model<float>(cfg, rng);

  std::map<std::string, Tensor<float>> want;
  for (auto& [name, t] : p.named()) want.emplace(name, t);
  std::map<std::string, bool> seen;
  for (auto& [name, t] : read_checkpoint(path)) {
    auto it = want.find(name);
    if (it == want.end())
      throw ParseError(path + ": unexpected tensor '" + name + "'");
    if (seen.count(name)) throw ParseError(path + ": duplicate tensor '" + name + "'");
    if (it->second.shape() != t.shape())
      throw ParseError(path + ": tensor '" + name + "' has wrong shape");
    std::copy(t.data(), t.data() + t.numel(), it->second.data());
    seen.emplace(name, true);
  }
  for (auto& [name, t] : want)
    if (!seen.count(name)) throw ParseError(path + ": missing tensor '" + name + "'");
  return p;
}

namespace {

Tensor<double> widen(const Tensor<float>& t) {
  if (!t.defined()) return {};
  Tensor<double> out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) out.data()[i] = t.data()[i];
  return out;
}

}  // namespace

ModelParams<double> to_double(const ModelParams<float>& p) {
  ModelParams<double> out;
  out.cfg = p.cfg;
  for (auto& t : p.att_w) out.att_w.push_back(widen(t));
  for (auto& t : p.att_b) out.att_b.push_back(widen(t));
  for (auto& t : p.bb_w) out.bb_w.push_back(widen(t));
  for (auto& t : p.bb_b) out.bb_b.push_back(widen(t));
  for (const ConvLSTMLayer<float>& y : p.lstm) {
    ConvLSTMLayer<double> d;
    d.in_ch = y.in_ch;
    d.hid_ch = y.hid_ch;
    d.kernel = y.kernel;
    d.conv_peephole = y.conv_peephole;
    d.wxi = widen(y.wxi); d.whi = widen(y.whi); d.bi = widen(y.bi);
    d.wxf = widen(y.wxf); d.whf = widen(y.whf); d.bf = widen(y.bf);
    d.wxc = widen(y.wxc); d.whc = widen(y.whc); d.bc = widen(y.bc);
    d.wxo = widen(y.wxo); d.who = widen(y.who); d.bo = widen(y.bo);
    d.wci = widen(y.wci); d.wcf = widen(y.wcf); d.wco = widen(y.wco);
    out.lstm.push_back(std::move(d));
  }
  out.trunk_w = widen(p.trunk_w);
  out.trunk_b = widen(p.trunk_b);
  out.head_intent_w = widen(p.head_intent_w);
  out.head_intent_b = widen(p.head_intent_b);
  out.head_left_w = widen(p.head_left_w);
  out.head_left_b = widen(p.head_left_b);
  out.head_right_w = widen(p.head_right_w);
  out.head_right_b = widen(p.head_right_b);
  out.head_view_w = widen(p.head_view_w);
  out.head_view_b = widen(p.head_view_b);
  return out;
}

#define BLINK_INSTANTIATE_MODEL(T)                                                  \
  template struct ModelParams<T>;                                                   \
  template ModelParams<T> init_model<T>(const ModelConfig&, RngStream&);            \
  template std::pair<Tensor<T>, Tensor<T>> attention_apply<T>(const Tensor<T>&,     \
                                                              const ModelParams<T>&); \
  template Tensor<T> backbone_features<T>(const Tensor<T>&, const ModelParams<T>&); \
  template FrameOut<T> heads_apply<T>(const Tensor<T>&, const ModelParams<T>&,      \
                                      const RunCtx&);                               \
  template std::vector<FrameOut<T>> forward_sequence<T>(                            \
      const std::vector<Tensor<T>>&, const ModelParams<T>&, const RunCtx&);         \
  template class InferenceSession<T>;

BLINK_INSTANTIATE_MODEL(float)
BLINK_INSTANTIATE_MODEL(double)

}  // namespace blink
