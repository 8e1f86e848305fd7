#include "airtrack/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace airtrack::scenario {

namespace {

enum class Pattern { kStripesH, kStripesV, kChecker, kDiagonal, kAntiDiagonal, kSplitH, kSplitV, kDots };

struct Appearance {
  Pattern pattern;
  int period;
  std::array<double, 3> a;
  std::array<double, 3> b;
};

// Identities 0 and 1 share colours and differ only in stripe orientation.
constexpr std::array<Appearance, kIdentityCount> kAppearances{{
    {Pattern::kStripesH, 8, {0.85, 0.15, 0.15}, {0.95, 0.95, 0.95}},
    {Pattern::kStripesV, 8, {0.85, 0.15, 0.15}, {0.95, 0.95, 0.95}},
    {Pattern::kChecker, 8, {0.15, 0.25, 0.80}, {0.90, 0.85, 0.20}},
    {Pattern::kDiagonal, 10, {0.20, 0.70, 0.25}, {0.80, 0.20, 0.75}},
    {Pattern::kSplitH, 0, {0.95, 0.55, 0.10}, {0.10, 0.12, 0.40}},
    {Pattern::kDots, 12, {0.05, 0.05, 0.05}, {0.20, 0.85, 0.85}},
    {Pattern::kStripesH, 12, {0.15, 0.60, 0.20}, {0.08, 0.08, 0.08}},
    {Pattern::kChecker, 16, {0.80, 0.20, 0.20}, {0.55, 0.55, 0.55}},
    {Pattern::kAntiDiagonal, 10, {0.50, 0.20, 0.65}, {0.95, 0.95, 0.95}},
    {Pattern::kSplitV, 0, {0.10, 0.55, 0.55}, {0.45, 0.28, 0.12}},
}};

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

bool pattern_bit(const Appearance& app, int u, int v, int size) {
  const int p = app.period;
  switch (app.pattern) {
    case Pattern::kStripesH: return floor_div(v, p) % 2 != 0;
    case Pattern::kStripesV: return floor_div(u, p) % 2 != 0;
    case Pattern::kChecker: return (floor_div(u, p) + floor_div(v, p)) % 2 != 0;
    case Pattern::kDiagonal: return floor_div(u + v, p) % 2 != 0;
    case Pattern::kAntiDiagonal: return floor_div(u - v + 4 * size, p) % 2 != 0;
    case Pattern::kSplitH: return v >= size / 2;
    case Pattern::kSplitV: return u >= size / 2;
    case Pattern::kDots: {
      const int du = u - floor_div(u, p) * p - p / 2;
      const int dv = v - floor_div(v, p) * p - p / 2;
      return du * du + dv * dv <= (p / 3) * (p / 3);
    }
  }
  return false;
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

ChipNuisance random_nuisance(Rng& rng, const std::array<double, 3>& jitter) {
  ChipNuisance n;
  n.gain = rng.uniform(0.75, 1.25);
  n.shift_x = static_cast<int>(rng.uniform_int(-5, 5));
  n.shift_y = static_cast<int>(rng.uniform_int(-5, 5));
  n.noise_std = 0.04;
  n.jitter = jitter;
  n.noise_seed = rng.next_u64();
  return n;
}

std::array<double, 3> random_jitter(Rng& rng) {
  return {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
}

Chip render_identity(int identity, const ChipNuisance& nuisance, int size) {
  if (identity < 0 || identity >= kIdentityCount) {
    throw Error(ErrorCode::kSpecError, "identity out of range: " + std::to_string(identity));
  }
  if (size < 1) throw Error(ErrorCode::kSpecError, "chip size must be positive");
  const Appearance& app = kAppearances[static_cast<std::size_t>(identity)];
  Rng noise(nuisance.noise_seed);
  std::vector<double> px(static_cast<std::size_t>(size) * size * 3);
  // patterns are defined on a 64 px canvas
  const double scale = 64.0 / size;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const int u = static_cast<int>(std::floor(c * scale)) + nuisance.shift_x;
      const int v = static_cast<int>(std::floor(r * scale)) + nuisance.shift_y;
      const auto& color = pattern_bit(app, u, v, 64) ? app.b : app.a;
      for (int ch = 0; ch < 3; ++ch) {
        const double e = nuisance.noise_std > 0.0 ? noise.normal(0.0, nuisance.noise_std) : 0.0;
        px[(static_cast<std::size_t>(r) * size + c) * 3 + ch] =
            quantize(nuisance.gain * (color[ch] + nuisance.jitter[ch]) + e);
      }
    }
  }
  return Chip(size, size, 3, std::move(px));
}

void ScenarioSpec::validate() const {
  if (frames < 1) throw Error(ErrorCode::kSpecError, "frames must be >= 1");
  if (!(width > 0.0 && height > 0.0)) throw Error(ErrorCode::kSpecError, "frame dims must be positive");
  if (!(position_noise >= 0.0 && size_noise >= 0.0)) {
    throw Error(ErrorCode::kSpecError, "noise levels must be >= 0");
  }
  if (!(zoom_amplitude >= 0.0 && zoom_amplitude < 0.5) || !(zoom_period > 0.0)) {
    throw Error(ErrorCode::kSpecError, "zoom schedule out of range");
  }
  if (chip_size < 1) throw Error(ErrorCode::kSpecError, "chip_size must be positive");
  for (const ObjectSpec& o : objects) {
    if (o.appearance < 0 || o.appearance >= kIdentityCount) {
      throw Error(ErrorCode::kSpecError, "appearance class out of range");
    }
    if (!(o.box_w > 0.0 && o.box_h > 0.0)) throw Error(ErrorCode::kSpecError, "box size must be positive");
    for (const Window& w : o.occlusions) {
      if (w.start < 0 || w.end > frames || w.start >= w.end) {
        throw Error(ErrorCode::kSpecError, "occlusion window outside the sequence");
      }
    }
    if (o.motion == MotionKind::kCrossing &&
        (o.cross_window.start < 0 || o.cross_window.start >= o.cross_window.end)) {
      throw Error(ErrorCode::kSpecError, "crossing window invalid");
    }
  }
}

namespace {

std::vector<Point2> trajectory(const ObjectSpec& o, int frames) {
  std::vector<Point2> out;
  Point2 p = o.start;
  for (int f = 0; f < frames; ++f) {
    Point2 q = p;
    if (o.motion == MotionKind::kCrossing) {
      const double span = static_cast<double>(o.cross_window.end - o.cross_window.start);
      const double s = std::clamp((f - static_cast<double>(o.cross_window.start)) / span, 0.0, 1.0);
      q.x += s * o.cross_offset.x;
      q.y += s * o.cross_offset.y;
    }
    out.push_back(q);
    double vx = o.velocity.x, vy = o.velocity.y;
    if (o.motion == MotionKind::kCurved) {
      const double a = o.turn_rate * f;
      vx = o.velocity.x * std::cos(a) - o.velocity.y * std::sin(a);
      vy = o.velocity.x * std::sin(a) + o.velocity.y * std::cos(a);
    }
    p.x += vx;
    p.y += vy;
  }
  return out;
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<std::array<double, 3>> jitter;
  std::vector<std::vector<Point2>> paths;
  for (const ObjectSpec& o : spec.objects) {
    jitter.push_back(random_jitter(rng));
    paths.push_back(trajectory(o, spec.frames));
  }

  Scenario out;
  out.frames = spec.frames;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    out.truth.push_back({static_cast<std::int64_t>(i) + 1, {}});
  }
  const Point2 c0{spec.width / 2.0, spec.height / 2.0};
  DetectionId next_id = 1;
  for (int f = 0; f < spec.frames; ++f) {
    const double zoom =
        1.0 + spec.zoom_amplitude * std::sin(2.0 * std::numbers::pi * f / spec.zoom_period);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const ObjectSpec& o = spec.objects[i];
      const Point2 p{paths[i][f].x + spec.camera_drift.x * f, paths[i][f].y + spec.camera_drift.y * f};
      const Point2 c{c0.x + zoom * (p.x - c0.x), c0.y + zoom * (p.y - c0.y)};
      const double w = o.box_w * zoom, h = o.box_h * zoom;
      const bool in_frame = c.x >= 0.0 && c.x < spec.width && c.y >= 0.0 && c.y < spec.height;
      if (!in_frame) continue;
      const bool occluded = std::any_of(o.occlusions.begin(), o.occlusions.end(),
                                        [&](const Window& win) { return win.contains(f); });
      if (!occluded || spec.truth_present_when_occluded) {
        out.truth[i].boxes[f] = BoundingBox{c.x - w / 2.0, c.y - h / 2.0, w, h};
      }
      if (occluded) continue;

      Detection d;
      d.frame_index = f;
      d.detection_id = next_id++;
      const double cx = c.x + rng.normal(0.0, spec.position_noise);
      const double cy = c.y + rng.normal(0.0, spec.position_noise);
      const double dw = std::max(2.0, w + rng.normal(0.0, spec.size_noise));
      const double dh = std::max(2.0, h + rng.normal(0.0, spec.size_noise));
      d.box = BoundingBox{cx - dw / 2.0, cy - dh / 2.0, dw, dh};
      d.label = "person";
      d.confidence = std::round(rng.uniform(0.7, 0.99) * 1000.0) / 1000.0;
      d.chip = render_identity(o.appearance, random_nuisance(rng, jitter[i]), spec.chip_size);
      if (spec.with_platform) {
        d.platform = PlatformMeta{-77.0365 + 1e-5 * f, 38.8977, 45.0 + 0.05 * f, -30.0, zoom};
      }
      out.truth_of_detection[d.detection_id] = out.truth[i].id;
      out.detections.push_back(std::move(d));
    }
  }
  return out;
}

ScenarioSpec preset(const std::string& name, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  ScenarioSpec s;
  s.name = name;
  s.seed = seed;
  if (name == "runners") {
    s.frames = 100;
    s.zoom_amplitude = 0.02;
    const Window gap{45, 55};
    const double lane_a = 200.0, lane_b = 228.0;
    const double x0 = 60.0;
    for (int k = 0; k < 2; ++k) {
      ObjectSpec o;
      o.appearance = k;
      o.motion = MotionKind::kCrossing;
      o.start = {x0 + rng.uniform(-8.0, 8.0), k == 0 ? lane_a : lane_b};
      o.velocity = {rng.uniform(3.2, 3.8), 0.0};
      o.cross_offset = {0.0, k == 0 ? lane_b - lane_a : lane_a - lane_b};
      o.cross_window = gap;
      o.box_w = 12.0;
      o.box_h = 22.0;
      o.occlusions = {gap};
      s.objects.push_back(o);
    }
  } else if (name == "walkers") {
    s.frames = 124;
    const std::array<int, 3> ids{2, 5, 7};
    ObjectSpec a;
    a.appearance = ids[0];
    a.start = {80.0 + rng.uniform(-10.0, 10.0), 120.0 + rng.uniform(-10.0, 10.0)};
    a.velocity = {rng.uniform(1.8, 2.4), rng.uniform(0.1, 0.4)};
    a.box_w = 14.0;
    a.box_h = 30.0;
    a.occlusions = {{40, 50}};
    ObjectSpec b;
    b.appearance = ids[1];
    b.motion = MotionKind::kCurved;
    b.start = {100.0 + rng.uniform(-10.0, 10.0), 300.0 + rng.uniform(-10.0, 10.0)};
    b.velocity = {rng.uniform(2.0, 2.4), 0.0};
    b.turn_rate = -0.004;
    b.box_w = 14.0;
    b.box_h = 30.0;
    ObjectSpec c;
    c.appearance = ids[2];
    c.start = {560.0 + rng.uniform(-10.0, 10.0), 400.0 + rng.uniform(-10.0, 10.0)};
    c.velocity = {-rng.uniform(1.8, 2.2), -rng.uniform(0.3, 0.6)};
    c.box_w = 14.0;
    c.box_h = 30.0;
    c.occlusions = {{70, 80}};
    s.objects = {a, b, c};
  } else {
    throw Error(ErrorCode::kSpecError, "unknown scenario preset '" + name + "'");
  }
  return s;
}

std::vector<std::vector<Detection>> by_frame(const std::vector<Detection>& detections, int frames) {
  std::vector<std::vector<Detection>> out(static_cast<std::size_t>(std::max(frames, 0)));
  for (const Detection& d : detections) {
    if (d.frame_index < 0) throw Error(ErrorCode::kInvalidArgument, "negative frame index");
    if (d.frame_index >= static_cast<std::int64_t>(out.size())) out.resize(static_cast<std::size_t>(d.frame_index) + 1);
    out[static_cast<std::size_t>(d.frame_index)].push_back(d);
  }
  return out;
}

}  // namespace airtrack::scenario
