#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "blink/checkpoint.hpp"
#include "blink/config.hpp"
#include "blink/model.hpp"
#include "blink/rng.hpp"
#include "blink/semantics.hpp"
#include "blink/tensor.hpp"

using namespace blink;

namespace {

Tensor<float> random_frame(int n, int s, RngStream& rng) {
  Tensor<float> x({n, 3, s, s});
  for (int64_t i = 0; i < x.numel(); ++i)
    x.data()[i] = static_cast<float>(rng.uniform());
  return x;
}

void check_rows_are_distributions(const Tensor<float>& t) {
  const int n = t.dim(0), c = t.dim(1);
  for (int i = 0; i < n; ++i) {
    double sum = 0;
    for (int j = 0; j < c; ++j) {
      const float v = t.data()[i * c + j];
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

}  // namespace

TEST_CASE("paper preset dimensions") {
  Config cfg = Config::defaults();
  cfg.set("model.preset", "paper");
  cfg.finalize();
  const ModelConfig m = ModelConfig::from(cfg);
  CHECK(m.input_size == 224);
  CHECK(m.att_channels == std::vector<int>{32, 64, 64, 1});
  CHECK(m.att_dilations == std::vector<int>{1, 2, 2, 1});
  REQUIRE(m.blocks.size() == 5);
  CHECK(m.blocks[0] == std::vector<int>{64, 64});
  CHECK(m.blocks[4] == std::vector<int>{512, 512, 512});
  CHECK(m.lstm_layers == 2);
  CHECK(m.lstm_channels == 256);
  CHECK(m.feature_hw() == 7);
  CHECK(m.feature_ch() == 512);
  CHECK(m.head_input() == 7 * 7 * 256);
}

TEST_CASE("paper preset attention and backbone output shapes") {
  Config cfg = Config::defaults();
  cfg.set("model.preset", "paper");
  cfg.finalize();
  const ModelConfig m = ModelConfig::from(cfg);
  RngStream rng(1);
  const ModelParams<float> p = init_model<float>(m, rng);
  RngStream d(2);
  const Tensor<float> roi = random_frame(1, 224, d);
  const auto [masked, mask] = attention_apply(roi, p);
  CHECK(mask.shape() == Shape{1, 1, 224, 224});
  CHECK(masked.shape() == Shape{1, 3, 224, 224});
  for (int64_t i = 0; i < mask.numel(); ++i) {
    CHECK(mask.data()[i] >= 0.0f);
    CHECK(mask.data()[i] <= 1.0f);
  }
  const Tensor<float> feat = backbone_features(masked, p);
  CHECK(feat.shape() == Shape{1, 512, 7, 7});
}

TEST_CASE("desk preset dimensions, parameter budget, sequence shapes") {
  const ModelConfig m;  // desk defaults
  CHECK(m.feature_hw() == 4);
  CHECK(m.feature_ch() == 64);
  CHECK(m.head_input() == 4 * 4 * 32);
  RngStream rng(3);
  const ModelParams<float> p = init_model<float>(m, rng);
  CHECK(p.param_count() > 0);
  CHECK(p.param_count() < 2000000);

  RngStream d(4);
  std::vector<Tensor<float>> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(random_frame(2, 64, d));
  const Tensor<float> feat = backbone_features(frames[0], p);
  CHECK(feat.shape() == Shape{2, 64, 4, 4});

  RunCtx ctx;
  const std::vector<FrameOut<float>> outs = forward_sequence(frames, p, ctx);
  REQUIRE(outs.size() == 3);
  for (const FrameOut<float>& o : outs) {
    CHECK(o.intent.shape() == Shape{2, kNumIntent});
    CHECK(o.left.shape() == Shape{2, kNumLight});
    CHECK(o.right.shape() == Shape{2, kNumLight});
    CHECK(o.view.shape() == Shape{2, kNumView});
    CHECK(o.mask.shape() == Shape{2, 1, 64, 64});
    check_rows_are_distributions(o.intent);
    check_rows_are_distributions(o.left);
    check_rows_are_distributions(o.right);
    check_rows_are_distributions(o.view);
  }
}

TEST_CASE("zero parameters produce uniform head distributions") {
  RngStream rng(5);
  ModelParams<float> p = init_model<float>(ModelConfig{}, rng);
  for (Tensor<float>& t : p.all())
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = 0.0f;
  RngStream d(6);
  const std::vector<Tensor<float>> frames{random_frame(2, 64, d)};
  const std::vector<FrameOut<float>> outs = forward_sequence(frames, p, RunCtx{});
  REQUIRE(outs.size() == 1);
  for (int i = 0; i < 2 * kNumIntent; ++i)
    CHECK(outs[0].intent.data()[i] == doctest::Approx(0.2).epsilon(1e-6));
  for (int i = 0; i < 2 * kNumLight; ++i)
    CHECK(outs[0].left.data()[i] == doctest::Approx(1.0 / 3).epsilon(1e-6));
  for (int i = 0; i < 2 * kNumView; ++i)
    CHECK(outs[0].view.data()[i] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("saturated final attention bias passes the roi through unchanged") {
  RngStream rng(7);
  ModelParams<float> p = init_model<float>(ModelConfig{}, rng);
  Tensor<float>& last_bias = p.att_b.back();
  for (int64_t i = 0; i < last_bias.numel(); ++i) last_bias.data()[i] = 1000.0f;
  RngStream d(8);
  const Tensor<float> roi = random_frame(2, 64, d);
  const auto [masked, mask] = attention_apply(roi, p);
  for (int64_t i = 0; i < mask.numel(); ++i) CHECK(mask.data()[i] == 1.0f);
  for (int64_t i = 0; i < roi.numel(); ++i)
    CHECK(masked.data()[i] == doctest::Approx(roi.data()[i]).epsilon(1e-6));
}

TEST_CASE("initialization is deterministic in the seed") {
  const ModelConfig m;
  RngStream a(11), b(11), c(12);
  const ModelParams<float> pa = init_model<float>(m, a);
  const ModelParams<float> pb = init_model<float>(m, b);
  const ModelParams<float> pc = init_model<float>(m, c);
  const std::vector<Tensor<float>> ta = pa.all(), tb = pb.all(), tc = pc.all();
  REQUIRE(ta.size() == tb.size());
  bool any_diff_c = false;
  for (size_t i = 0; i < ta.size(); ++i) {
    REQUIRE(ta[i].shape() == tb[i].shape());
    CHECK(ta[i].vec() == tb[i].vec());
    if (ta[i].vec() != tc[i].vec()) any_diff_c = true;
  }
  CHECK(any_diff_c);
}

TEST_CASE("checkpoint round-trips bit-exactly and validates its contents") {
  RngStream rng(13);
  const ModelParams<float> p = init_model<float>(ModelConfig{}, rng);
  const std::string path = "test_model_ckpt.bin";
  save_model(path, p);
  const ModelParams<float> q = load_model(path);
  CHECK(q.cfg.text() == p.cfg.text());
  const auto pn = p.named(), qn = q.named();
  REQUIRE(pn.size() == qn.size());
  for (size_t i = 0; i < pn.size(); ++i) {
    CHECK(pn[i].first == qn[i].first);
    CHECK(pn[i].second.vec() == qn[i].second.vec());
  }

  auto expect_parse_error = [&](const std::string& needle) {
    try {
      load_model(path);
      FAIL_CHECK("expected a load error containing '" << needle << "'");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  auto entries = p.named();
  entries[0].first = "nonsense";
  write_checkpoint(path, entries);
  expect_parse_error("unexpected tensor 'nonsense'");

  entries = p.named();
  const std::string renamed_away = entries[1].first;
  entries.erase(entries.begin() + 1);
  write_checkpoint(path, entries);
  expect_parse_error("missing tensor '" + renamed_away + "'");

  entries = p.named();
  entries[0].second = Tensor<float>({1, 2, 3});
  write_checkpoint(path, entries);
  expect_parse_error("wrong shape");

  std::remove(path.c_str());
  std::remove((path + ".config").c_str());
}

TEST_CASE("model config text round-trips and validate names the field") {
  Config cfg = Config::defaults();
  cfg.set("model.lstm.conv_peephole", "true");
  cfg.finalize();
  const ModelConfig m = ModelConfig::from(cfg);
  const ModelConfig back = ModelConfig::parse_text(m.text());
  CHECK(back.text() == m.text());

  ModelConfig bad;
  bad.lstm_kernel = 2;
  try {
    bad.validate();
    FAIL_CHECK("expected validate to reject an even kernel");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.lstm.kernel") != std::string::npos);
  }
  ModelConfig odd;
  odd.input_size = 31;
  CHECK_THROWS_AS(odd.validate(), ConfigError);
}

TEST_CASE("inference session matches the batch sequence path") {
  RngStream rng(17);
  const ModelParams<float> p = init_model<float>(ModelConfig{}, rng);
  RngStream d(18);
  std::vector<Tensor<float>> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(random_frame(1, 64, d));
  const std::vector<FrameOut<float>> batch = forward_sequence(frames, p, RunCtx{});

  InferenceSession<float> sess(p);
  for (int t = 0; t < 4; ++t) {
    const FrameOut<float> o = sess.step(frames[t]);
    for (int j = 0; j < kNumIntent; ++j)
      CHECK(o.intent.data()[j] ==
            doctest::Approx(batch[t].intent.data()[j]).epsilon(1e-5));
  }
  sess.reset();
  const FrameOut<float> again = sess.step(frames[0]);
  for (int j = 0; j < kNumIntent; ++j)
    CHECK(again.intent.data()[j] == batch[0].intent.data()[j]);
}
