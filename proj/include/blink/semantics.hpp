#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace blink {

// Class indices are part of the on-disk and report formats; never reorder.
enum class Light : uint8_t { On = 0, Off = 1, Unknown = 2 };
enum class Intent : uint8_t { Left = 0, Right = 1, Flashers = 2, Off = 3, Unknown = 4 };
enum class View : uint8_t { Behind = 0, Left = 1, Front = 2, Right = 3 };

inline constexpr int kNumLight = 3;
inline constexpr int kNumIntent = 5;
inline constexpr int kNumView = 4;

struct FrameLabels {
  Light left = Light::Off;
  Light right = Light::Off;
  Intent intent = Intent::Off;
  View view = View::Behind;

  bool operator==(const FrameLabels&) const = default;
};

// Total over all 9 light pairs. `confident` resolves single-UNKNOWN pairs to
// the known light's implied intent; without it they collapse to UNKNOWN.
Intent lights_to_intent(Light left, Light right, bool confident);

// Label change under horizontal mirroring. Involution.
FrameLabels mirror_labels(const FrameLabels& in);

const char* light_name(Light v);
const char* intent_name(Intent v);
const char* view_name(View v);
bool parse_light(const std::string& s, Light& out);
bool parse_intent(const std::string& s, Intent& out);
bool parse_view(const std::string& s, View& out);

// Index of the maximum, ties to the lowest index. Rejects empty input.
int argmax_class(const float* p, int n);
int argmax_class(const double* p, int n);
int argmax_class(const std::vector<float>& p);
int argmax_class(const std::vector<double>& p);

}  // namespace blink
