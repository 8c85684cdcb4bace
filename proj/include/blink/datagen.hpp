#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blink/rng.hpp"
#include "blink/semantics.hpp"

namespace blink {

// Half-open pixel rectangle.
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool contains(const Rect& r) const {
    return x0 <= r.x0 && y0 <= r.y0 && x1 >= r.x1 && y1 >= r.y1;
  }
  bool operator==(const Rect&) const = default;
};

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Occlusion {
  int t0 = 0, t1 = 0;  // half-open frame interval
  Rect box;
  bool operator==(const Occlusion&) const = default;
};

// Deterministic description of one rendered sequence. Geometry is integer so
// output bytes are platform-independent.
struct SceneSpec {
  int canvas = 64;
  double fps = 10.0;
  int length = 20;
  View view = View::Behind;
  bool left_active = false;
  bool right_active = false;
  double blink_freq = 1.5;   // [1.0, 2.0]
  double blink_phase = 0.0;  // [0, 1)
  Rect body;
  Rect marker;       // view-identifying feature
  Rect light_left;   // the vehicle's LEFT signal, wherever it lands on screen
  Rect light_right;  // the vehicle's RIGHT signal
  Rgb background, body_color, marker_color, light_on, light_off, occluder_color;
  int noise = 8;  // +- per channel, integer
  std::vector<Occlusion> occlusions;

  void validate() const;  // throws std::invalid_argument naming the field
  std::string canonical_text() const;
  static SceneSpec parse_text(const std::string& text);
  bool operator==(const SceneSpec&) const = default;
};

struct SequenceSample {
  SceneSpec spec;
  uint64_t seed = 0;
  std::vector<uint8_t> frames;  // length * canvas * canvas * 3, interleaved RGB
  std::vector<FrameLabels> labels;

  const uint8_t* frame(int t) const {
    return frames.data() + static_cast<size_t>(t) * spec.canvas * spec.canvas * 3;
  }
};

// 50% duty square wave: lit iff frac(t*freq/fps + phase) < 0.5.
bool blink_waveform(double freq, double phase, double fps, int t);

// Labels for frame t (occlusion coverage of a light makes it UNKNOWN).
FrameLabels frame_labels(const SceneSpec& spec, int t);

// Renders frame t; rng drives the pixel noise only.
void render_frame(const SceneSpec& spec, int t, RngStream& rng, uint8_t* rgb);

SequenceSample generate_sequence(const SceneSpec& spec, uint64_t seed);

// Sequence-level class: UNKNOWN when a scheduled occluder hides the whole
// body for at least half the frames, else the lights' confident intent.
Intent nominal_intent(const SceneSpec& spec);

struct MixConfig {
  // Sequence-count fractions per intent class; OFF dominant, FLASHERS rarest.
  double off = 0.35, left = 0.20, right = 0.20, unknown = 0.15, flashers = 0.10;
  bool balanced = false;
};

struct DatagenConfig {
  int canvas = 64;
  double fps = 10.0;
  int length = 20;
  int train_count = 600, val_count = 100, test_count = 200;
  MixConfig mix;
  double occlusion_rate = 0.25;  // single-light occluder chance outside UNKNOWN
  int noise = 8;
  uint64_t seed = 1;
};

// Sequence counts per intent class for one split; sums to total exactly.
std::vector<int> mix_counts(const MixConfig& mix, int total);

// Random scene of the requested nominal class, drawn from rng.
SceneSpec sample_spec(const DatagenConfig& cfg, Intent nominal, RngStream& rng);

struct DatasetFiles {
  std::string train, val, test, manifest;
};

// Writes train/val/test .blkd files plus a manifest into out_dir.
DatasetFiles generate_dataset(const DatagenConfig& cfg, const std::string& out_dir);

// BLKD container.
void write_dataset(const std::string& path, const std::vector<SequenceSample>& seqs,
                   int canvas, double fps);
std::vector<SequenceSample> read_dataset(const std::string& path);

Intent majority_intent(const SequenceSample& s);

}  // namespace blink
