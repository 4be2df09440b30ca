#include "mustan/toygen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mustan/error.hpp"

namespace fs = std::filesystem;

namespace mustan::toygen {

namespace {

// SplitMix64: explicit bit-level definition so generated files do not depend
// on the standard library's distribution implementations.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  std::uint8_t byte() { return static_cast<std::uint8_t>(next() & 0xFF); }

 private:
  std::uint64_t state_;
};

using Color = std::array<double, 3>;

double wrap(double v, double period) {
  double r = std::fmod(v, period);
  if (r < 0) r += period;
  if (r >= period) r -= period;
  return r;
}

struct Palette {
  Color a;
  Color b;
};

Palette palette_for(std::uint64_t seed) {
  Stream s(seed ^ 0xB4C6A0F1D2E3ull);
  Palette p;
  for (int c = 0; c < 3; ++c) {
    p.a[c] = s.uniform(30, 200);
    p.b[c] = s.uniform(30, 200);
  }
  return p;
}

Color background_at(const SceneSpec& spec, const Palette& pal, double wy, double wx, Stream* noise,
                    double flicker) {
  Color out{};
  switch (spec.background) {
    case Background::flat_color:
      out = pal.a;
      break;
    case Background::gradient: {
      const double t = wrap(wx + 0.5 * wy, spec.width) / spec.width;
      for (int c = 0; c < 3; ++c) out[c] = pal.a[c] + (pal.b[c] - pal.a[c]) * t;
      break;
    }
    case Background::checker: {
      const int cell = 8;
      const bool odd = ((static_cast<long>(std::floor(wy / cell)) + static_cast<long>(std::floor(wx / cell))) & 1) != 0;
      out = odd ? pal.b : pal.a;
      break;
    }
    case Background::noise_flicker: {
      const double n = noise ? noise->uniform(-14, 14) : 0.0;
      for (int c = 0; c < 3; ++c) out[c] = pal.a[c] * flicker + n;
      break;
    }
  }
  return out;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Placement {
  double top;
  double left;
};

Placement sprite_position(const SpriteSpec& s, int t) {
  double y = s.y0 + s.vy * t;
  const double x = s.x0 + s.vx * t;
  if (s.trajectory == Trajectory::sinusoidal) y += s.amplitude * std::sin(2.0 * M_PI * t / s.period);
  return {y, x};
}

// Local coordinates (v, u) of the pixel centre inside the sprite box, or
// false if not covered. Positions wrap at the frame borders.
bool covers(const SpriteSpec& s, const Placement& at, int H, int W, int py, int px, double& v, double& u) {
  v = wrap(py + 0.5 - at.top, H);
  u = wrap(px + 0.5 - at.left, W);
  if (v >= s.height || u >= s.width) return false;
  if (s.shape == SpriteShape::rect) return true;
  const double dy = (v - 0.5 * s.height) / (0.5 * s.height);
  const double dx = (u - 0.5 * s.width) / (0.5 * s.width);
  return dy * dy + dx * dx <= 1.0;
}

}  // namespace

std::string to_string(Background b) {
  switch (b) {
    case Background::flat_color:
      return "flat_color";
    case Background::gradient:
      return "gradient";
    case Background::checker:
      return "checker";
    case Background::noise_flicker:
      return "noise_flicker";
  }
  return "unknown";
}

Background parse_background(const std::string& s) {
  for (auto b : {Background::flat_color, Background::gradient, Background::checker, Background::noise_flicker})
    if (to_string(b) == s) return b;
  throw ConfigError("unknown background '" + s + "'");
}

std::string to_string(Lighting l) { return l == Lighting::day ? "day" : "night"; }

Lighting parse_lighting(const std::string& s) {
  if (s == "day") return Lighting::day;
  if (s == "night") return Lighting::night;
  throw ConfigError("unknown lighting '" + s + "'");
}

void SceneSpec::validate() const {
  if (height <= 0 || width <= 0 || height % 32 != 0 || width % 32 != 0)
    throw ConfigError("scene size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be positive and divisible by 32");
  if (num_frames < 1) throw ConfigError("scene needs at least one frame");
  if (camera_jitter < 0) throw ConfigError("camera jitter must be >= 0");
  if (sprites.size() > 255) throw ConfigError("at most 255 sprites fit an 8-bit instance map");
  for (std::size_t i = 0; i < sprites.size(); ++i) {
    const auto& s = sprites[i];
    const std::string tag = "sprite " + std::to_string(i);
    if (s.height < 1 || s.width < 1) throw ConfigError(tag + " has an empty box");
    if (s.y0 < 0 || s.x0 < 0 || s.y0 + s.height > height || s.x0 + s.width > width)
      throw ConfigError(tag + " does not fit inside the frame at t=0");
    for (double v : {s.vx, s.vy, s.amplitude, s.period})
      if (!std::isfinite(v)) throw ConfigError(tag + " has a non-finite motion parameter");
    if (s.trajectory == Trajectory::sinusoidal && !(s.period > 0))
      throw ConfigError(tag + " needs a positive period");
  }
}

ToyVideo generate_toy_video(const SceneSpec& spec) {
  spec.validate();
  const int H = spec.height;
  const int W = spec.width;
  const Palette pal = palette_for(spec.seed);
  Stream jitter(spec.seed ^ 0x51A7E2ull);
  Stream noise(spec.seed ^ 0x0E15Eull);

  std::vector<std::size_t> order(spec.sprites.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return spec.sprites[a].z_order < spec.sprites[b].z_order; });

  ToyVideo video;
  for (int t = 0; t < spec.num_frames; ++t) {
    int dy = 0;
    int dx = 0;
    if (spec.camera_jitter > 0) {
      dy = jitter.integer(-spec.camera_jitter, spec.camera_jitter);
      dx = jitter.integer(-spec.camera_jitter, spec.camera_jitter);
    }
    const double flicker = spec.background == Background::noise_flicker ? noise.uniform(0.85, 1.15) : 1.0;

    std::vector<Color> canvas(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        canvas[static_cast<std::size_t>(y) * W + x] = background_at(spec, pal, y + dy, x + dx, &noise, flicker);

    Mask instances = Mask::Zero(H, W);
    for (std::size_t idx : order) {
      const SpriteSpec& s = spec.sprites[idx];
      Placement at = sprite_position(s, t);
      at.top -= dy;
      at.left -= dx;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double v = 0;
          double u = 0;
          if (!covers(s, at, H, W, y, x, v, u)) continue;
          const bool dark = s.texture == Texture::striped && (static_cast<int>(std::floor(u)) / 2) % 2 == 1;
          Color& px = canvas[static_cast<std::size_t>(y) * W + x];
          for (int c = 0; c < 3; ++c) px[c] = s.color[c] * (dark ? 0.45 : 1.0);
          instances(y, x) = static_cast<std::uint8_t>(idx + 1);
        }
    }

    const double gain = spec.lighting == Lighting::night ? kNightGain : 1.0;
    RgbImage frame(H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c) frame.at(y, x, c) = to_byte(canvas[static_cast<std::size_t>(y) * W + x][c] * gain);

    video.masks.push_back((instances > 0).cast<std::uint8_t>());
    video.instance_maps.push_back(std::move(instances));
    video.frames.push_back(std::move(frame));
  }
  return video;
}

std::string write_toyset(const std::vector<SceneSpec>& specs, const std::string& out_dir, bool overwrite) {
  const fs::path root(out_dir);
  std::error_code ec;
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!overwrite) throw DataError("output directory " + out_dir + " is not empty (use overwrite)");
    if (!fs::exists(root / "manifest.json"))
      throw DataError("refusing to overwrite " + out_dir + ": it does not look like a toyset");
    fs::remove_all(root, ec);
    if (ec) throw DataError("cannot clear " + out_dir + ": " + ec.message());
  }
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());

  nlohmann::json videos = nlohmann::json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    SceneSpec spec = specs[i];
    if (spec.name.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "video_%03zu", i);
      spec.name = name;
    }
    const ToyVideo video = generate_toy_video(spec);
    const fs::path dir = root / spec.name;
    for (const char* sub : {"frames", "masks", "instances"}) fs::create_directories(dir / sub);
    for (int t = 0; t < spec.num_frames; ++t) {
      char file[32];
      std::snprintf(file, sizeof(file), "%06d.png", t + 1);
      write_rgb_png((dir / "frames" / file).string(), video.frames[t]);
      write_gray8_png((dir / "masks" / file).string(), (video.masks[t] * std::uint8_t{255}).eval());
      write_gray8_png((dir / "instances" / file).string(), video.instance_maps[t]);
    }
    std::ofstream(dir / "category.txt") << to_string(spec.background) << "\n";
    videos.push_back({{"video_id", spec.name}, {"spec", spec}});
  }

  const fs::path manifest = root / "manifest.json";
  std::ofstream out(manifest);
  out << nlohmann::json{{"generator", "mustan-toygen"}, {"version", 1}, {"videos", videos}}.dump(2) << "\n";
  if (!out) throw DataError("cannot write " + manifest.string());
  return manifest.string();
}

void to_json(nlohmann::json& j, const SpriteSpec& s) {
  j = nlohmann::json{{"shape", s.shape == SpriteShape::rect ? "rect" : "ellipse"},
                     {"size", {s.height, s.width}},
                     {"position", {s.y0, s.x0}},
                     {"trajectory", s.trajectory == Trajectory::linear ? "linear" : "sinusoidal"},
                     {"velocity", {s.vy, s.vx}},
                     {"amplitude", s.amplitude},
                     {"period", s.period},
                     {"texture", s.texture == Texture::solid ? "solid" : "striped"},
                     {"color", s.color},
                     {"z_order", s.z_order}};
}

void from_json(const nlohmann::json& j, SpriteSpec& s) {
  const std::string shape = j.value("shape", "rect");
  if (shape != "rect" && shape != "ellipse") throw ConfigError("unknown sprite shape '" + shape + "'");
  s.shape = shape == "rect" ? SpriteShape::rect : SpriteShape::ellipse;
  if (j.contains("size")) {
    s.height = j["size"][0].get<int>();
    s.width = j["size"][1].get<int>();
  }
  if (j.contains("position")) {
    s.y0 = j["position"][0].get<double>();
    s.x0 = j["position"][1].get<double>();
  }
  const std::string traj = j.value("trajectory", "linear");
  if (traj != "linear" && traj != "sinusoidal") throw ConfigError("unknown trajectory '" + traj + "'");
  s.trajectory = traj == "linear" ? Trajectory::linear : Trajectory::sinusoidal;
  if (j.contains("velocity")) {
    s.vy = j["velocity"][0].get<double>();
    s.vx = j["velocity"][1].get<double>();
  }
  s.amplitude = j.value("amplitude", 0.0);
  s.period = j.value("period", 16.0);
  const std::string texture = j.value("texture", "solid");
  if (texture != "solid" && texture != "striped") throw ConfigError("unknown texture '" + texture + "'");
  s.texture = texture == "solid" ? Texture::solid : Texture::striped;
  if (j.contains("color")) s.color = j["color"].get<std::array<std::uint8_t, 3>>();
  s.z_order = j.value("z_order", 0);
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"name", s.name},
                     {"background", to_string(s.background)},
                     {"lighting", to_string(s.lighting)},
                     {"camera_jitter", s.camera_jitter},
                     {"size", {s.height, s.width}},
                     {"num_frames", s.num_frames},
                     {"sprites", s.sprites},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.name = j.value("name", "");
  s.background = parse_background(j.value("background", "flat_color"));
  s.lighting = parse_lighting(j.value("lighting", "day"));
  s.camera_jitter = j.value("camera_jitter", 0);
  if (j.contains("size")) {
    s.height = j["size"][0].get<int>();
    s.width = j["size"][1].get<int>();
  }
  s.num_frames = j.value("num_frames", 30);
  s.sprites = j.value("sprites", std::vector<SpriteSpec>{});
  s.seed = j.value("seed", std::uint64_t{0});
}

SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& options) {
  if (options.backgrounds.empty()) throw ConfigError("random_scene needs at least one background");
  if (options.min_sprites < 0 || options.max_sprites < options.min_sprites)
    throw ConfigError("random_scene: invalid sprite count range");
  Stream s(seed * 0x2545F4914F6CDD1Dull + 0x1234567ull);
  SceneSpec spec;
  spec.seed = seed;
  spec.height = options.height;
  spec.width = options.width;
  spec.num_frames = options.num_frames;
  spec.lighting = options.lighting;
  spec.camera_jitter = options.camera_jitter;
  spec.background = options.backgrounds[s.next() % options.backgrounds.size()];
  const int count = s.integer(options.min_sprites, options.max_sprites);
  for (int i = 0; i < count; ++i) {
    SpriteSpec sp;
    sp.shape = (s.next() & 1) ? SpriteShape::ellipse : SpriteShape::rect;
    sp.height = s.integer(std::max(4, options.height / 8), std::max(4, options.height / 3));
    sp.width = s.integer(std::max(4, options.width / 10), std::max(4, options.width / 4));
    sp.height = std::min(sp.height, options.height);
    sp.width = std::min(sp.width, options.width);
    sp.y0 = s.uniform(0, options.height - sp.height);
    sp.x0 = s.uniform(0, options.width - sp.width);
    sp.trajectory = (s.next() % 3 == 0) ? Trajectory::sinusoidal : Trajectory::linear;
    const double speed = s.uniform(1.0, 3.0);
    const double angle = s.uniform(0, 2 * M_PI);
    sp.vy = speed * std::sin(angle);
    sp.vx = speed * std::cos(angle);
    sp.amplitude = sp.trajectory == Trajectory::sinusoidal ? s.uniform(2, 6) : 0.0;
    sp.period = s.uniform(8, 24);
    sp.texture = (s.next() & 1) ? Texture::striped : Texture::solid;
    for (auto& c : sp.color) c = static_cast<std::uint8_t>(s.integer(20, 255));
    sp.z_order = s.integer(0, 3);
    spec.sprites.push_back(sp);
  }
  return spec;
}

}  // namespace mustan::toygen
