#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "blink/datagen.hpp"
#include "blink/rng.hpp"
#include "blink/semantics.hpp"

using namespace blink;

namespace {

SceneSpec clean_spec(Intent nominal, uint64_t seed, int length = 20) {
  DatagenConfig cfg;
  cfg.length = length;
  cfg.occlusion_rate = 0.0;
  RngStream rng(seed);
  return sample_spec(cfg, nominal, rng);
}

double light_mean(const SequenceSample& s, const Rect& box, int t) {
  const uint8_t* f = s.frame(t);
  double sum = 0;
  int n = 0;
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x, ++n)
      sum += f[(y * s.spec.canvas + x) * 3];  // red channel
  return sum / n;
}

std::string thrown_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("blink_waveform hand-checked frames") {
  // freq 1.5 Hz at 10 fps: frac(0.15 t) < 0.5, so frames 0-3 lit, 4-6 dark.
  for (int t : {0, 1, 2, 3}) CHECK(blink_waveform(1.5, 0.0, 10.0, t));
  for (int t : {4, 5, 6}) CHECK_FALSE(blink_waveform(1.5, 0.0, 10.0, t));
  CHECK(blink_waveform(1.5, 0.0, 10.0, 7));  // wrapped past one period
  // A half-period phase shift inverts every frame.
  for (int t = 0; t < 40; ++t)
    CHECK(blink_waveform(1.5, 0.5, 10.0, t) != blink_waveform(1.5, 0.0, 10.0, t));
}

TEST_CASE("blink_waveform transition count matches the frequency") {
  // 1.5 Hz over 60 s is 90 cycles, two transitions each.
  int flips = 0;
  for (int t = 0; t + 1 < 600; ++t)
    flips += blink_waveform(1.5, 0.0, 10.0, t) != blink_waveform(1.5, 0.0, 10.0, t + 1);
  CHECK(flips >= 178);
  CHECK(flips <= 182);
}

TEST_CASE("rendered blink frequency is recoverable by DFT") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    const SceneSpec spec = clean_spec(Intent::Left, seed, 600);
    REQUIRE(spec.occlusions.empty());
    const SequenceSample s = generate_sequence(spec, seed * 7 + 1);
    const int T = spec.length;
    std::vector<double> sig(T);
    for (int t = 0; t < T; ++t) sig[t] = light_mean(s, spec.light_left, t);
    const double mean = std::accumulate(sig.begin(), sig.end(), 0.0) / T;
    double best_mag = -1.0;
    int best_k = 1;
    for (int k = 1; k <= T / 2; ++k) {
      double re = 0, im = 0;
      for (int t = 0; t < T; ++t) {
        const double ang = -2.0 * std::numbers::pi * k * t / T;
        re += (sig[t] - mean) * std::cos(ang);
        im += (sig[t] - mean) * std::sin(ang);
      }
      const double mag = re * re + im * im;
      if (mag > best_mag) {
        best_mag = mag;
        best_k = k;
      }
    }
    const double recovered = best_k * spec.fps / T;
    CHECK(std::abs(recovered - spec.blink_freq) <= 0.1);
  }
}

TEST_CASE("generation is byte-deterministic in the seed") {
  const SceneSpec spec = clean_spec(Intent::Right, 5);
  const SequenceSample a = generate_sequence(spec, 42);
  const SequenceSample b = generate_sequence(spec, 42);
  CHECK(a.frames == b.frames);
  CHECK(a.labels == b.labels);
  const SequenceSample c = generate_sequence(spec, 43);
  CHECK(a.frames != c.frames);  // noise differs
  CHECK(a.labels == c.labels);  // labels don't depend on the noise seed
}

TEST_CASE("labels carry the logical light state, not the instantaneous pixels") {
  for (Intent nominal : {Intent::Left, Intent::Right, Intent::Flashers, Intent::Off}) {
    const SceneSpec spec = clean_spec(nominal, 17 + int(nominal));
    const SequenceSample s = generate_sequence(spec, 3);
    bool saw_lit = false, saw_dark = false;
    for (int t = 0; t < spec.length; ++t) {
      const FrameLabels& lab = s.labels[t];
      // An active signal stays ON through the dark half of its blink cycle.
      CHECK(lab.left == (spec.left_active ? Light::On : Light::Off));
      CHECK(lab.right == (spec.right_active ? Light::On : Light::Off));
      CHECK(lab.intent == nominal);
      CHECK(lab.intent == lights_to_intent(lab.left, lab.right, true));
      CHECK(lab.view == spec.view);
      const bool lit = blink_waveform(spec.blink_freq, spec.blink_phase, spec.fps, t);
      (lit ? saw_lit : saw_dark) = true;
    }
    // Both halves of the cycle occur, so ON labels do coincide with dark pixels.
    CHECK(saw_lit);
    CHECK(saw_dark);
  }
}

TEST_CASE("occlusion marks a light unknown only when fully covered") {
  SceneSpec spec = clean_spec(Intent::Left, 23);
  const Rect L = spec.light_left;
  // Fully containing box over frames [3, 7).
  spec.occlusions.push_back({3, 7, {L.x0 - 1, L.y0 - 1, L.x1 + 1, L.y1 + 1}});
  // Half-covering box over frames [10, 12) leaves the light readable.
  spec.occlusions.push_back({10, 12, {L.x0, L.y0, (L.x0 + L.x1) / 2, L.y1}});
  for (int t = 0; t < spec.length; ++t) {
    const FrameLabels lab = frame_labels(spec, t);
    if (t >= 3 && t < 7) {
      CHECK(lab.left == Light::Unknown);
    } else {
      CHECK(lab.left != Light::Unknown);
    }
    CHECK(lab.right != Light::Unknown);
    CHECK(lab.intent == lights_to_intent(lab.left, lab.right, true));
  }
}

TEST_CASE("view geometry places lights and marker consistently") {
  bool seen[kNumView] = {false, false, false, false};
  DatagenConfig cfg;
  RngStream rng(99);
  for (int i = 0; i < 200; ++i) {
    const SceneSpec s = sample_spec(cfg, Intent::Off, rng);
    seen[int(s.view)] = true;
    switch (s.view) {
      case View::Behind:
        CHECK(s.light_left.x0 < s.light_right.x0);
        CHECK(s.marker.y1 == s.body.y1);  // tail strip along the bottom
        break;
      case View::Front:
        CHECK(s.light_left.x0 > s.light_right.x0);  // facing view mirrors sides
        CHECK(s.marker.y0 == s.body.y0);
        break;
      case View::Left:
        CHECK(s.marker.x0 == s.body.x0);  // nose points image-left
        break;
      case View::Right:
        CHECK(s.marker.x1 == s.body.x1);
        break;
    }
    CHECK(s.body.contains(s.marker));
    CHECK(s.body.contains(s.light_left));
    CHECK(s.body.contains(s.light_right));
  }
  for (bool b : seen) CHECK(b);
}

TEST_CASE("nominal intent reflects actives and scheduled occlusion") {
  CHECK(nominal_intent(clean_spec(Intent::Left, 1)) == Intent::Left);
  CHECK(nominal_intent(clean_spec(Intent::Right, 2)) == Intent::Right);
  CHECK(nominal_intent(clean_spec(Intent::Flashers, 3)) == Intent::Flashers);
  CHECK(nominal_intent(clean_spec(Intent::Off, 4)) == Intent::Off);
  DatagenConfig cfg;
  RngStream rng(7);
  const SceneSpec hidden = sample_spec(cfg, Intent::Unknown, rng);
  CHECK(nominal_intent(hidden) == Intent::Unknown);
  REQUIRE(hidden.occlusions.size() == 1);
  CHECK(hidden.occlusions[0].box.contains(hidden.body));
  CHECK(hidden.occlusions[0].t1 == hidden.length);

  // A brief full-body occlusion is not enough to relabel the sequence.
  SceneSpec brief = clean_spec(Intent::Left, 31);
  brief.occlusions.push_back(
      {0, 3, {0, 0, brief.canvas, brief.canvas}});
  CHECK(nominal_intent(brief) == Intent::Left);
}

TEST_CASE("mix_counts sums exactly and honors the fractions") {
  MixConfig mix;
  CHECK_THROWS_AS(mix_counts(mix, 3), std::invalid_argument);
  for (int total : {5, 7, 100, 999}) {
    const std::vector<int> c = mix_counts(mix, total);
    REQUIRE(c.size() == size_t(kNumIntent));
    CHECK(std::accumulate(c.begin(), c.end(), 0) == total);
    for (int v : c) CHECK(v >= 1);
  }
  // Index order is the Intent order: LEFT, RIGHT, FLASHERS, OFF, UNKNOWN.
  const std::vector<int> c = mix_counts(mix, 1000);
  CHECK(c == std::vector<int>{200, 200, 100, 350, 150});

  mix.balanced = true;
  const std::vector<int> b = mix_counts(mix, 103);
  CHECK(std::accumulate(b.begin(), b.end(), 0) == 103);
  const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
  CHECK(*hi - *lo <= 1);
}

TEST_CASE("scene spec text round-trips") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    DatagenConfig cfg;
    RngStream rng(seed);
    const SceneSpec s = sample_spec(cfg, Intent::Unknown, rng);
    CHECK(SceneSpec::parse_text(s.canonical_text()) == s);
  }
  SceneSpec bad = clean_spec(Intent::Off, 9);
  bad.body.x1 = bad.body.x0 - 1;
  const std::string msg = thrown_message([&] { bad.validate(); });
  CHECK(msg.find("body") != std::string::npos);
}

TEST_CASE("dataset container round-trips and rejects foreign files") {
  std::vector<SequenceSample> seqs;
  for (uint64_t i = 0; i < 3; ++i)
    seqs.push_back(generate_sequence(clean_spec(Intent::Left, 40 + i, 12), i));
  const std::string path = "test_datagen_roundtrip.blkd";
  write_dataset(path, seqs, seqs[0].spec.canvas, seqs[0].spec.fps);
  const std::vector<SequenceSample> back = read_dataset(path);
  REQUIRE(back.size() == seqs.size());
  for (size_t i = 0; i < seqs.size(); ++i) {
    CHECK(back[i].spec == seqs[i].spec);
    CHECK(back[i].seed == seqs[i].seed);
    CHECK(back[i].frames == seqs[i].frames);
    CHECK(back[i].labels == seqs[i].labels);
  }
  std::remove(path.c_str());

  const std::string bad = "test_datagen_bad.blkd";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "JPEGnot a dataset";
  }
  std::string msg = thrown_message([&] { read_dataset(bad); });
  CHECK(msg.find("bad magic, not a dataset file") != std::string::npos);
  {
    std::ofstream os(bad, std::ios::binary);
    os << "BLKD";
    const uint32_t v = 99;
    os.write(reinterpret_cast<const char*>(&v), 4);
  }
  msg = thrown_message([&] { read_dataset(bad); });
  CHECK(msg.find("unsupported version 99 (reader supports 1)") != std::string::npos);
  std::remove(bad.c_str());
}

TEST_CASE("majority intent picks the most frequent frame label") {
  SequenceSample s;
  s.labels.resize(10);
  for (int t = 0; t < 10; ++t)
    s.labels[t].intent = t < 6 ? Intent::Left : Intent::Unknown;
  CHECK(majority_intent(s) == Intent::Left);
}
