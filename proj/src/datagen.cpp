#include "blink/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "blink/binio.hpp"
#include "blink/image.hpp"

namespace blink {

namespace {

bool overlap(const Rect& a, const Rect& b) {
  return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("SceneSpec: " + msg);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string class_map_text() {
  std::ostringstream os;
  for (int i = 0; i < kNumIntent; ++i)
    os << "intent " << i << " " << intent_name(static_cast<Intent>(i)) << "\n";
  for (int i = 0; i < kNumLight; ++i)
    os << "light " << i << " " << light_name(static_cast<Light>(i)) << "\n";
  for (int i = 0; i < kNumView; ++i)
    os << "view " << i << " " << view_name(static_cast<View>(i)) << "\n";
  return os.str();
}

constexpr uint32_t kDatasetVersion = 1;

}  // namespace

void SceneSpec::validate() const {
  check(canvas >= 16, "canvas must be >= 16");
  check(length >= 1, "length must be >= 1");
  check(fps > 0, "fps must be positive");
  check(blink_freq >= 1.0 && blink_freq <= 2.0, "blink_freq outside [1.0, 2.0]");
  check(blink_phase >= 0.0 && blink_phase < 1.0, "blink_phase outside [0, 1)");
  check(noise >= 0 && noise <= 64, "noise outside [0, 64]");
  const Rect frame{0, 0, canvas, canvas};
  check(body.width() > 0 && body.height() > 0, "body is empty");
  check(frame.contains(body), "body extends outside the canvas");
  check(body.contains(marker), "marker extends outside the body");
  for (const Rect* L : {&light_left, &light_right}) {
    check(L->width() > 0 && L->height() > 0, "light box is empty");
    check(body.contains(*L), "light box extends outside the body");
    check(!overlap(*L, marker), "light box overlaps the marker");
  }
  check(!overlap(light_left, light_right), "light boxes overlap");
  for (const auto& o : occlusions) {
    check(o.t0 >= 0 && o.t0 < o.t1 && o.t1 <= length, "occlusion interval invalid");
    check(frame.contains(o.box) && o.box.width() > 0 && o.box.height() > 0,
          "occlusion box invalid");
  }
}

bool blink_waveform(double freq, double phase, double fps, int t) {
  double x = t * freq / fps + phase;
  x -= std::floor(x);
  return x < 0.5;
}

FrameLabels frame_labels(const SceneSpec& spec, int t) {
  auto covered = [&](const Rect& light) {
    for (const auto& o : spec.occlusions)
      if (t >= o.t0 && t < o.t1 && o.box.contains(light)) return true;
    return false;
  };
  FrameLabels lab;
  lab.left = covered(spec.light_left) ? Light::Unknown
             : spec.left_active       ? Light::On
                                      : Light::Off;
  lab.right = covered(spec.light_right) ? Light::Unknown
              : spec.right_active       ? Light::On
                                        : Light::Off;
  lab.intent = lights_to_intent(lab.left, lab.right, true);
  lab.view = spec.view;
  return lab;
}

void render_frame(const SceneSpec& spec, int t, RngStream& rng, uint8_t* rgb) {
  const int S = spec.canvas;
  ImageU8 img = ImageU8::filled(S, S, spec.background.r, spec.background.g,
                                spec.background.b);
  img.fill_rect(spec.body.x0, spec.body.y0, spec.body.x1, spec.body.y1,
                spec.body_color.r, spec.body_color.g, spec.body_color.b);
  img.fill_rect(spec.marker.x0, spec.marker.y0, spec.marker.x1, spec.marker.y1,
                spec.marker_color.r, spec.marker_color.g, spec.marker_color.b);
  const bool lit = blink_waveform(spec.blink_freq, spec.blink_phase, spec.fps, t);
  auto draw_light = [&](const Rect& box, bool active) {
    const Rgb c = (active && lit) ? spec.light_on : spec.light_off;
    img.fill_rect(box.x0, box.y0, box.x1, box.y1, c.r, c.g, c.b);
  };
  draw_light(spec.light_left, spec.left_active);
  draw_light(spec.light_right, spec.right_active);
  for (const auto& o : spec.occlusions)
    if (t >= o.t0 && t < o.t1)
      img.fill_rect(o.box.x0, o.box.y0, o.box.x1, o.box.y1, spec.occluder_color.r,
                    spec.occluder_color.g, spec.occluder_color.b);
  if (spec.noise > 0) {
    for (size_t i = 0; i < img.rgb.size(); ++i) {
      const int v =
          img.rgb[i] + static_cast<int>(rng.uniform_int(-spec.noise, spec.noise));
      img.rgb[i] = static_cast<uint8_t>(std::clamp(v, 0, 255));
    }
  }
  std::copy(img.rgb.begin(), img.rgb.end(), rgb);
}

SequenceSample generate_sequence(const SceneSpec& spec, uint64_t seed) {
  spec.validate();
  SequenceSample s;
  s.spec = spec;
  s.seed = seed;
  const size_t frame_bytes = static_cast<size_t>(spec.canvas) * spec.canvas * 3;
  s.frames.resize(frame_bytes * spec.length);
  s.labels.resize(spec.length);
  RngStream base(seed);
  for (int t = 0; t < spec.length; ++t) {
    RngStream frame_rng = base.split(static_cast<uint64_t>(t));
    render_frame(spec, t, frame_rng, s.frames.data() + frame_bytes * t);
    s.labels[static_cast<size_t>(t)] = frame_labels(spec, t);
  }
  return s;
}

Intent nominal_intent(const SceneSpec& spec) {
  int hidden = 0;
  for (int t = 0; t < spec.length; ++t) {
    for (const auto& o : spec.occlusions)
      if (t >= o.t0 && t < o.t1 && o.box.contains(spec.body)) {
        ++hidden;
        break;
      }
  }
  if (2 * hidden >= spec.length) return Intent::Unknown;
  return lights_to_intent(spec.left_active ? Light::On : Light::Off,
                          spec.right_active ? Light::On : Light::Off, true);
}

std::vector<int> mix_counts(const MixConfig& mix, int total) {
  if (total < kNumIntent)
    throw std::invalid_argument("mix_counts: need at least " +
                                std::to_string(kNumIntent) + " sequences, got " +
                                std::to_string(total));
  // Intent index order: LEFT, RIGHT, FLASHERS, OFF, UNKNOWN.
  std::vector<double> frac(kNumIntent, 1.0 / kNumIntent);
  if (!mix.balanced) {
    frac = {mix.left, mix.right, mix.flashers, mix.off, mix.unknown};
    double sum = 0;
    for (double f : frac) {
      if (f < 0) throw std::invalid_argument("mix_counts: negative fraction");
      sum += f;
    }
    if (sum <= 0) throw std::invalid_argument("mix_counts: empty mix");
    for (double& f : frac) f /= sum;
  }
  std::vector<int> counts(kNumIntent);
  std::vector<std::pair<double, int>> rema;
  int assigned = 0;
  for (int i = 0; i < kNumIntent; ++i) {
    const double exact = frac[static_cast<size_t>(i)] * total;
    counts[static_cast<size_t>(i)] = static_cast<int>(exact);
    assigned += counts[static_cast<size_t>(i)];
    rema.push_back({exact - counts[static_cast<size_t>(i)], i});
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int i = 0; assigned < total; ++i, ++assigned)
    counts[static_cast<size_t>(rema[static_cast<size_t>(i % kNumIntent)].second)]++;
  // Every class must appear at least once.
  for (int i = 0; i < kNumIntent; ++i) {
    while (counts[static_cast<size_t>(i)] == 0) {
      const int big = static_cast<int>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      counts[static_cast<size_t>(big)]--;
      counts[static_cast<size_t>(i)]++;
    }
  }
  return counts;
}

SceneSpec sample_spec(const DatagenConfig& cfg, Intent nominal, RngStream& rng) {
  SceneSpec s;
  s.canvas = cfg.canvas;
  s.fps = cfg.fps;
  s.length = cfg.length;
  s.noise = cfg.noise;
  s.view = static_cast<View>(rng.uniform_int(0, kNumView - 1));
  Intent base = nominal;
  if (nominal == Intent::Unknown)
    base = static_cast<Intent>(rng.uniform_int(0, 3));  // any visible signal state
  s.left_active = base == Intent::Left || base == Intent::Flashers;
  s.right_active = base == Intent::Right || base == Intent::Flashers;
  s.blink_freq = rng.uniform(1.0, 2.0);
  s.blink_phase = rng.uniform();

  auto jit = [&](int base_v, int amp) {
    const int v = base_v + static_cast<int>(rng.uniform_int(-amp, amp));
    return static_cast<uint8_t>(std::clamp(v, 0, 255));
  };
  s.background = {jit(120, 20), jit(126, 20), jit(132, 20)};
  s.body_color = {jit(58, 14), jit(60, 14), jit(72, 14)};
  s.light_on = {jit(250, 5), jit(170, 10), jit(42, 10)};
  s.light_off = {jit(70, 8), jit(46, 8), jit(40, 8)};
  s.occluder_color = {jit(100, 14), jit(142, 14), jit(100, 14)};
  const bool side = s.view == View::Left || s.view == View::Right;
  if (s.view == View::Behind)
    s.marker_color = {jit(34, 8), jit(34, 8), jit(46, 8)};
  else if (s.view == View::Front)
    s.marker_color = {jit(148, 10), jit(160, 10), jit(182, 10)};
  else
    s.marker_color = {jit(172, 10), jit(150, 10), jit(118, 10)};

  const int S = cfg.canvas;
  int bx0 = (side ? 2 : 3) * S / 16, bx1 = (side ? 14 : 13) * S / 16;
  int by0 = (side ? 6 : 5) * S / 16, by1 = (side ? 11 : 12) * S / 16;
  const int num = static_cast<int>(rng.uniform_int(52, 72));  // scale num/64
  const int cx = (bx0 + bx1) / 2, cy = (by0 + by1) / 2;
  auto scaled = [&](int c, int v) { return c + (v - c) * num / 64; };
  bx0 = scaled(cx, bx0);
  bx1 = scaled(cx, bx1);
  by0 = scaled(cy, by0);
  by1 = scaled(cy, by1);
  int dx = static_cast<int>(rng.uniform_int(-S / 16, S / 16));
  int dy = static_cast<int>(rng.uniform_int(-S / 16, S / 16));
  dx = std::clamp(dx, 1 - bx0, S - 1 - bx1);
  dy = std::clamp(dy, 1 - by0, S - 1 - by1);
  bx0 += dx;
  bx1 += dx;
  by0 += dy;
  by1 += dy;
  s.body = {bx0, by0, bx1, by1};

  const int bw = bx1 - bx0, bh = by1 - by0;
  const int lw = std::max(3, bw / 8), lh = std::max(3, bh / 4);
  const int pad = std::max(1, bw / 16);
  const int ly0 = by0 + bh * 3 / 8, ly1 = ly0 + lh;
  if (!side) {
    const Rect boxA{bx0 + pad, ly0, bx0 + pad + lw, ly1};   // image-left
    const Rect boxB{bx1 - pad - lw, ly0, bx1 - pad, ly1};   // image-right
    if (s.view == View::Behind) {
      s.marker = {bx0, by1 - bh / 6, bx1, by1};
      s.light_left = boxA;
      s.light_right = boxB;
    } else {
      s.marker = {bx0, by0, bx1, by0 + bh / 6};
      s.light_left = boxB;  // facing the vehicle mirrors its sides
      s.light_right = boxA;
    }
  } else {
    const int mw = std::max(2, bw / 6);
    if (s.view == View::Left) {
      s.marker = {bx0, by0, bx0 + mw, by1};  // nose points image-left
      s.light_left = {bx0 + mw + pad, ly0, bx0 + mw + pad + lw, ly1};
      s.light_right = {bx1 - pad - lw, ly0, bx1 - pad, ly1};
    } else {
      s.marker = {bx1 - mw, by0, bx1, by1};  // nose points image-right
      s.light_right = {bx1 - mw - pad - lw, ly0, bx1 - mw - pad, ly1};
      s.light_left = {bx0 + pad, ly0, bx0 + pad + lw, ly1};
    }
  }

  if (nominal == Intent::Unknown) {
    const int t0 = static_cast<int>(rng.uniform_int(0, std::min(2, s.length - 1)));
    const Rect occ{std::max(0, bx0 - 2), std::max(0, by0 - 2), std::min(S, bx1 + 2),
                   std::min(S, by1 + 2)};
    s.occlusions.push_back({t0, s.length, occ});
  } else if (rng.bernoulli(cfg.occlusion_rate) && s.length >= 8) {
    const Rect& L = rng.bernoulli(0.5) ? s.light_left : s.light_right;
    const int m = static_cast<int>(rng.uniform_int(1, 2));
    const Rect occ{std::max(0, L.x0 - m), std::max(0, L.y0 - m),
                   std::min(S, L.x1 + m), std::min(S, L.y1 + m)};
    const int t0 = static_cast<int>(rng.uniform_int(2, s.length / 2));
    const int dur = static_cast<int>(rng.uniform_int(3, std::max(3, s.length - t0 - 1)));
    s.occlusions.push_back({t0, std::min(s.length, t0 + dur), occ});
  }
  s.validate();
  return s;
}

std::string SceneSpec::canonical_text() const {
  std::ostringstream os;
  auto rect = [&](const char* k, const Rect& r) {
    os << k << " " << r.x0 << " " << r.y0 << " " << r.x1 << " " << r.y1 << "\n";
  };
  auto color = [&](const char* k, const Rgb& c) {
    os << k << " " << int(c.r) << " " << int(c.g) << " " << int(c.b) << "\n";
  };
  os << "canvas " << canvas << "\n";
  os << "fps " << fmt_double(fps) << "\n";
  os << "length " << length << "\n";
  os << "view " << view_name(view) << "\n";
  os << "left_active " << int(left_active) << "\n";
  os << "right_active " << int(right_active) << "\n";
  os << "blink_freq " << fmt_double(blink_freq) << "\n";
  os << "blink_phase " << fmt_double(blink_phase) << "\n";
  rect("body", body);
  rect("marker", marker);
  rect("light_left", light_left);
  rect("light_right", light_right);
  color("background", background);
  color("body_color", body_color);
  color("marker_color", marker_color);
  color("light_on", light_on);
  color("light_off", light_off);
  color("occluder_color", occluder_color);
  os << "noise " << noise << "\n";
  os << "occlusions " << occlusions.size() << "\n";
  for (const auto& o : occlusions)
    os << "occ " << o.t0 << " " << o.t1 << " " << o.box.x0 << " " << o.box.y0 << " "
       << o.box.x1 << " " << o.box.y1 << "\n";
  return os.str();
}

SceneSpec SceneSpec::parse_text(const std::string& text) {
  SceneSpec s;
  std::istringstream is(text);
  std::string key;
  size_t expected_occ = 0;
  auto rect = [&](Rect& r) { is >> r.x0 >> r.y0 >> r.x1 >> r.y1; };
  auto color = [&](Rgb& c) {
    int r, g, b;
    is >> r >> g >> b;
    c = {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
  };
  while (is >> key) {
    if (key == "canvas") is >> s.canvas;
    else if (key == "fps") is >> s.fps;
    else if (key == "length") is >> s.length;
    else if (key == "view") {
      std::string v;
      is >> v;
      if (!parse_view(v, s.view)) throw ParseError("SceneSpec: bad view " + v);
    } else if (key == "left_active") {
      int v;
      is >> v;
      s.left_active = v != 0;
    } else if (key == "right_active") {
      int v;
      is >> v;
      s.right_active = v != 0;
    } else if (key == "blink_freq") is >> s.blink_freq;
    else if (key == "blink_phase") is >> s.blink_phase;
    else if (key == "body") rect(s.body);
    else if (key == "marker") rect(s.marker);
    else if (key == "light_left") rect(s.light_left);
    else if (key == "light_right") rect(s.light_right);
    else if (key == "background") color(s.background);
    else if (key == "body_color") color(s.body_color);
    else if (key == "marker_color") color(s.marker_color);
    else if (key == "light_on") color(s.light_on);
    else if (key == "light_off") color(s.light_off);
    else if (key == "noise") is >> s.noise;
    else if (key == "occluder_color") color(s.occluder_color);
    else if (key == "occlusions") is >> expected_occ;
    else if (key == "occ") {
      Occlusion o;
      is >> o.t0 >> o.t1;
      rect(o.box);
      s.occlusions.push_back(o);
    } else throw ParseError("SceneSpec: unknown key " + key);
    if (!is && !is.eof()) throw ParseError("SceneSpec: bad value for key " + key);
  }
  if (s.occlusions.size() != expected_occ)
    throw ParseError("SceneSpec: occlusion count mismatch");
  return s;
}

void write_dataset(const std::string& path, const std::vector<SequenceSample>& seqs,
                   int canvas, double fps) {
  ByteWriter w;
  w.bytes("BLKD", 4);
  w.u32(kDatasetVersion);
  w.u32(static_cast<uint32_t>(canvas));
  w.f64(fps);
  w.str(class_map_text());
  w.u32(static_cast<uint32_t>(seqs.size()));
  for (const auto& s : seqs) {
    if (s.spec.canvas != canvas)
      throw std::invalid_argument("write_dataset: sequence canvas " +
                                  std::to_string(s.spec.canvas) +
                                  " differs from header " + std::to_string(canvas));
    w.str(s.spec.canonical_text());
    w.u64(s.seed);
    w.u32(static_cast<uint32_t>(s.spec.length));
    w.bytes(s.frames.data(), s.frames.size());
    for (const auto& lab : s.labels) {
      w.u8(static_cast<uint8_t>(lab.left));
      w.u8(static_cast<uint8_t>(lab.right));
      w.u8(static_cast<uint8_t>(lab.intent));
      w.u8(static_cast<uint8_t>(lab.view));
    }
  }
  write_file_atomic(path, w.buf);
}

std::vector<SequenceSample> read_dataset(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size(), path);
  char magic[5] = {0};
  r.bytes(magic, 4);
  if (std::string(magic) != "BLKD") r.fail("bad magic, not a dataset file");
  const uint32_t version = r.u32();
  if (version != kDatasetVersion)
    r.fail("unsupported version " + std::to_string(version) + " (reader supports " +
           std::to_string(kDatasetVersion) + ")");
  const int canvas = static_cast<int>(r.u32());
  const double fps = r.f64();
  const std::string cmap = r.str();
  if (cmap != class_map_text()) r.fail("class-index map mismatch");
  const uint32_t count = r.u32();
  std::vector<SequenceSample> seqs;
  seqs.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    SequenceSample s;
    s.spec = SceneSpec::parse_text(r.str());
    if (s.spec.canvas != canvas) r.fail("record canvas differs from header");
    if (s.spec.fps != fps) r.fail("record fps differs from header");
    s.seed = r.u64();
    const uint32_t T = r.u32();
    if (static_cast<int>(T) != s.spec.length) r.fail("frame count differs from spec");
    s.frames.resize(static_cast<size_t>(T) * canvas * canvas * 3);
    r.bytes(s.frames.data(), s.frames.size());
    s.labels.resize(T);
    for (auto& lab : s.labels) {
      const uint8_t l = r.u8(), rr = r.u8(), in = r.u8(), vw = r.u8();
      if (l >= kNumLight || rr >= kNumLight || in >= kNumIntent || vw >= kNumView)
        r.fail("label byte out of range");
      lab = {static_cast<Light>(l), static_cast<Light>(rr), static_cast<Intent>(in),
             static_cast<View>(vw)};
    }
    seqs.push_back(std::move(s));
  }
  if (!r.done()) r.fail("trailing bytes after last record");
  return seqs;
}

Intent majority_intent(const SequenceSample& s) {
  int counts[kNumIntent] = {0};
  for (const auto& lab : s.labels) counts[static_cast<int>(lab.intent)]++;
  int best = 0;
  for (int i = 1; i < kNumIntent; ++i)
    if (counts[i] > counts[best]) best = i;
  return static_cast<Intent>(best);
}

DatasetFiles generate_dataset(const DatagenConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const char* split_names[3] = {"train", "val", "test"};
  const int split_counts[3] = {cfg.train_count, cfg.val_count, cfg.test_count};
  RngStream master(cfg.seed);
  DatasetFiles files;
  std::ostringstream manifest;
  manifest << "dataset manifest\n";
  manifest << "canvas " << cfg.canvas << "\nfps " << fmt_double(cfg.fps) << "\nlength "
           << cfg.length << "\nseed " << cfg.seed << "\n";
  for (int sp = 0; sp < 3; ++sp) {
    const auto counts = mix_counts(cfg.mix, split_counts[sp]);
    std::vector<Intent> intents;
    for (int c = 0; c < kNumIntent; ++c)
      intents.insert(intents.end(), static_cast<size_t>(counts[static_cast<size_t>(c)]),
                     static_cast<Intent>(c));
    RngStream split_rng = master.split(static_cast<uint64_t>(sp));
    std::vector<SequenceSample> seqs;
    seqs.reserve(intents.size());
    for (size_t i = 0; i < intents.size(); ++i) {
      RngStream seq_rng = split_rng.split(i);
      const SceneSpec spec = sample_spec(cfg, intents[i], seq_rng);
      seqs.push_back(generate_sequence(spec, seq_rng.next_u64()));
    }
    const std::string path = out_dir + "/" + split_names[sp] + ".blkd";
    write_dataset(path, seqs, cfg.canvas, cfg.fps);
    if (sp == 0) files.train = path;
    if (sp == 1) files.val = path;
    if (sp == 2) files.test = path;
    manifest << "split " << split_names[sp] << " file " << split_names[sp]
             << ".blkd sequences " << intents.size();
    for (int c = 0; c < kNumIntent; ++c)
      manifest << " " << intent_name(static_cast<Intent>(c)) << " "
               << counts[static_cast<size_t>(c)];
    manifest << "\n";
  }
  files.manifest = out_dir + "/manifest.txt";
  write_text_atomic(files.manifest, manifest.str());
  return files;
}

}  // namespace blink
