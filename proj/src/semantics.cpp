#include "blink/semantics.hpp"

#include <stdexcept>

namespace blink {

Intent lights_to_intent(Light left, Light right, bool confident) {
  if (left == Light::Unknown && right == Light::Unknown) return Intent::Unknown;
  if (left == Light::Unknown || right == Light::Unknown) {
    if (!confident) return Intent::Unknown;
    const Light known = left == Light::Unknown ? right : left;
    if (known == Light::Off) return Intent::Off;
    return left == Light::On ? Intent::Left : Intent::Right;
  }
  if (left == Light::On && right == Light::On) return Intent::Flashers;
  if (left == Light::On) return Intent::Left;
  if (right == Light::On) return Intent::Right;
  return Intent::Off;
}

FrameLabels mirror_labels(const FrameLabels& in) {
  FrameLabels out;
  out.left = in.right;
  out.right = in.left;
  switch (in.intent) {
    case Intent::Left: out.intent = Intent::Right; break;
    case Intent::Right: out.intent = Intent::Left; break;
    default: out.intent = in.intent; break;
  }
  switch (in.view) {
    case View::Left: out.view = View::Right; break;
    case View::Right: out.view = View::Left; break;
    default: out.view = in.view; break;
  }
  return out;
}

const char* light_name(Light v) {
  switch (v) {
    case Light::On: return "ON";
    case Light::Off: return "OFF";
    case Light::Unknown: return "UNKNOWN";
  }
  return "?";
}

const char* intent_name(Intent v) {
  switch (v) {
    case Intent::Left: return "LEFT_TURN";
    case Intent::Right: return "RIGHT_TURN";
    case Intent::Flashers: return "FLASHERS";
    case Intent::Off: return "OFF";
    case Intent::Unknown: return "UNKNOWN";
  }
  return "?";
}

const char* view_name(View v) {
  switch (v) {
    case View::Behind: return "BEHIND";
    case View::Left: return "LEFT";
    case View::Front: return "FRONT";
    case View::Right: return "RIGHT";
  }
  return "?";
}

bool parse_light(const std::string& s, Light& out) {
  for (int i = 0; i < kNumLight; ++i)
    if (s == light_name(static_cast<Light>(i))) {
      out = static_cast<Light>(i);
      return true;
    }
  return false;
}

bool parse_intent(const std::string& s, Intent& out) {
  for (int i = 0; i < kNumIntent; ++i)
    if (s == intent_name(static_cast<Intent>(i))) {
      out = static_cast<Intent>(i);
      return true;
    }
  return false;
}

bool parse_view(const std::string& s, View& out) {
  for (int i = 0; i < kNumView; ++i)
    if (s == view_name(static_cast<View>(i))) {
      out = static_cast<View>(i);
      return true;
    }
  return false;
}

namespace {
template <typename T>
int argmax_impl(const T* p, int n) {
  if (n <= 0 || p == nullptr)
    throw std::invalid_argument("argmax_class: empty distribution");
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (p[i] > p[best]) best = i;
  return best;
}
}  // namespace

int argmax_class(const float* p, int n) { return argmax_impl(p, n); }
int argmax_class(const double* p, int n) { return argmax_impl(p, n); }
int argmax_class(const std::vector<float>& p) {
  return argmax_impl(p.data(), static_cast<int>(p.size()));
}
int argmax_class(const std::vector<double>& p) {
  return argmax_impl(p.data(), static_cast<int>(p.size()));
}

}  // namespace blink
