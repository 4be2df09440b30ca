#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mustan/image_io.hpp"

namespace mustan::toygen {

enum class Background { flat_color, gradient, checker, noise_flicker };
enum class Lighting { day, night };
enum class SpriteShape { rect, ellipse };
enum class Trajectory { linear, sinusoidal };
enum class Texture { solid, striped };

inline constexpr double kNightGain = 0.35;

struct SpriteSpec {
  SpriteShape shape = SpriteShape::rect;
  int height = 10;
  int width = 10;
  // Top-left corner at t = 0, in pixels.
  double y0 = 0;
  double x0 = 0;
  Trajectory trajectory = Trajectory::linear;
  double vy = 0;  // pixels / frame
  double vx = 1;
  // Sinusoidal trajectories add amplitude * sin(2 pi t / period) to y.
  double amplitude = 0;
  double period = 16;
  Texture texture = Texture::solid;
  std::array<std::uint8_t, 3> color{230, 40, 40};
  int z_order = 0;
};

struct SceneSpec {
  std::string name;  // video directory; defaults to video_%03d
  Background background = Background::flat_color;
  Lighting lighting = Lighting::day;
  int camera_jitter = 0;  // max per-frame shift in pixels
  int height = 64;
  int width = 96;
  int num_frames = 30;
  std::vector<SpriteSpec> sprites;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ToyVideo {
  std::vector<RgbImage> frames;
  std::vector<Mask> masks;          // {0, 1}
  std::vector<Mask> instance_maps;  // 0 = background, i + 1 = sprite i
};

ToyVideo generate_toy_video(const SceneSpec& spec);

// Writes <out_dir>/<video>/{frames,masks,instances}/%06d.png, category.txt
// and <out_dir>/manifest.json; returns the manifest path. A non-empty
// out_dir is refused unless `overwrite` is set and it holds a previous toyset.
std::string write_toyset(const std::vector<SceneSpec>& specs, const std::string& out_dir,
                         bool overwrite = false);

std::string to_string(Background b);
Background parse_background(const std::string& s);
std::string to_string(Lighting l);
Lighting parse_lighting(const std::string& s);

void to_json(nlohmann::json& j, const SpriteSpec& s);
void from_json(const nlohmann::json& j, SpriteSpec& s);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

// Options for drawing random but valid scenes.
struct RandomSceneOptions {
  int height = 64;
  int width = 96;
  int num_frames = 30;
  int min_sprites = 1;
  int max_sprites = 3;
  std::vector<Background> backgrounds{Background::flat_color};
  Lighting lighting = Lighting::day;
  int camera_jitter = 0;
};

SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& options);

}  // namespace mustan::toygen
