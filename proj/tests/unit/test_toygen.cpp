#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mustan/error.hpp"
#include "mustan/toygen.hpp"
#include "support/fixtures.hpp"

using namespace mustan;
using namespace mustan::toygen;
namespace fs = std::filesystem;

namespace {

SceneSpec scene_with(std::vector<SpriteSpec> sprites, int frames = 10) {
  SceneSpec s;
  s.num_frames = frames;
  s.sprites = std::move(sprites);
  s.seed = 17;
  return s;
}

// Coverage of the sprite union at t, sampled on a k x k grid per pixel.
double oracle_area(const SceneSpec& spec, int t, int k) {
  const int H = spec.height, W = spec.width;
  long hits = 0;
  for (int sy = 0; sy < H * k; ++sy)
    for (int sx = 0; sx < W * k; ++sx) {
      const double y = (sy + 0.5) / k, x = (sx + 0.5) / k;
      for (const auto& s : spec.sprites) {
        double top = s.y0 + s.vy * t;
        if (s.trajectory == Trajectory::sinusoidal) top += s.amplitude * std::sin(2 * M_PI * t / s.period);
        const double left = s.x0 + s.vx * t;
        const double v = std::fmod(std::fmod(y - top, H) + H, H);
        const double u = std::fmod(std::fmod(x - left, W) + W, W);
        bool in = v < s.height && u < s.width;
        if (in && s.shape == SpriteShape::ellipse) {
          const double a = 2 * v / s.height - 1, b = 2 * u / s.width - 1;
          in = a * a + b * b <= 1;
        }
        if (in) {
          ++hits;
          break;
        }
      }
    }
  return static_cast<double>(hits) / (k * k);
}

long mask_area(const Mask& m) { return static_cast<long>((m.cast<int>()).sum()); }

}  // namespace

TEST_CASE("a scene without sprites has empty masks") {
  const auto v = generate_toy_video(scene_with({}, 5));
  REQUIRE(v.masks.size() == 5);
  for (const auto& m : v.masks) CHECK(mask_area(m) == 0);
}

TEST_CASE("a 10x10 rectangle covers 100 pixels in every frame") {
  SpriteSpec r;
  r.y0 = 5;
  r.x0 = 5;
  r.vx = 2;
  r.vy = 1;
  const auto v = generate_toy_video(scene_with({r}, 40));
  for (const auto& m : v.masks) CHECK(mask_area(m) == 100);
}

TEST_CASE("overlapping sprites: instances label the top sprite, masks are the union") {
  SpriteSpec a, b;
  a.y0 = 10;
  a.x0 = 10;
  a.height = a.width = 20;
  a.z_order = 1;
  b.y0 = 15;
  b.x0 = 15;
  b.height = b.width = 20;
  b.vx = -1;
  b.color = {20, 200, 20};
  const auto spec = scene_with({a, b}, 8);
  const auto v = generate_toy_video(spec);
  for (std::size_t t = 0; t < v.masks.size(); ++t) {
    const Mask& inst = v.instance_maps[t];
    std::set<int> values(inst.data(), inst.data() + inst.size());
    for (int x : values) CHECK(x <= 2);
    CHECK(((inst > 0).cast<std::uint8_t>() == v.masks[t]).all());
    CHECK(mask_area(v.masks[t]) == doctest::Approx(oracle_area(spec, static_cast<int>(t), 4)).epsilon(0.02));
  }
  // Sprite a (z 1) is drawn over b where they overlap.
  CHECK(v.instance_maps[0](20, 20) == 1);
  CHECK(v.instance_maps[0](32, 32) == 2);
}

TEST_CASE("rasterized area agrees with a 4x supersampled oracle") {
  RandomSceneOptions opt;
  opt.min_sprites = 1;
  opt.max_sprites = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec spec = random_scene(seed, opt);
    spec.num_frames = 6;
    const auto v = generate_toy_video(spec);
    for (int t = 0; t < spec.num_frames; t += 5) {
      CAPTURE(seed);
      const double oracle = oracle_area(spec, t, 4);
      CHECK(std::abs(mask_area(v.masks[t]) - oracle) <= 0.02 * oracle + 1e-9);
    }
  }
}

TEST_CASE("night scenes darken the frames but keep the masks") {
  SpriteSpec r;
  r.shape = SpriteShape::ellipse;
  r.height = 16;
  r.width = 24;
  r.y0 = 8;
  r.x0 = 8;
  r.texture = Texture::striped;
  SceneSpec day = scene_with({r}, 6);
  day.background = Background::gradient;
  SceneSpec night = day;
  night.lighting = Lighting::night;
  const auto d = generate_toy_video(day), n = generate_toy_video(night);
  for (int t = 0; t < 6; ++t) {
    CHECK((d.masks[t] == n.masks[t]).all());
    double diff = 0;
    for (std::size_t i = 0; i < d.frames[t].pixels.size(); ++i)
      diff = std::max(diff, std::abs(n.frames[t].pixels[i] - kNightGain * d.frames[t].pixels[i]));
    CHECK(diff <= 1.0);
  }
}

TEST_CASE("generation is deterministic per seed") {
  RandomSceneOptions opt;
  opt.backgrounds = {Background::noise_flicker};
  opt.camera_jitter = 2;
  const auto a = generate_toy_video(random_scene(5, opt));
  const auto b = generate_toy_video(random_scene(5, opt));
  const auto c = generate_toy_video(random_scene(6, opt));
  bool same = true, differs = false;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    same = same && a.frames[t].pixels == b.frames[t].pixels && (a.masks[t] == b.masks[t]).all();
    differs = differs || a.frames[t].pixels != c.frames[t].pixels;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("write_toyset layout, reruns and overwrite rules") {
  const fs::path root = mustan::testing::fresh_dir("toyset");
  std::vector<SceneSpec> specs{scene_with({SpriteSpec{}}, 30), scene_with({}, 30)};
  specs[1].background = Background::checker;
  const fs::path out = root / "set";
  CHECK(write_toyset(specs, out.string()) == (out / "manifest.json").string());
  for (const char* video : {"video_000", "video_001"})
    for (const char* sub : {"frames", "masks", "instances"}) {
      long n = 0;
      for ([[maybe_unused]] const auto& e : fs::directory_iterator(out / video / sub)) ++n;
      CHECK(n == 30);
    }
  std::ifstream cat(out / "video_001" / "category.txt");
  std::string category;
  cat >> category;
  CHECK(category == "checker");

  const auto read_all = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string frame = read_all(out / "video_000" / "frames" / "000007.png");
  const std::string manifest = read_all(out / "manifest.json");
  CHECK_THROWS_AS(write_toyset(specs, out.string()), DataError);
  write_toyset(specs, out.string(), true);
  CHECK(read_all(out / "video_000" / "frames" / "000007.png") == frame);
  CHECK(read_all(out / "manifest.json") == manifest);

  const fs::path foreign = root / "foreign";
  fs::create_directories(foreign);
  std::ofstream(foreign / "keep.txt") << "x";
  CHECK_THROWS_AS(write_toyset(specs, foreign.string(), true), DataError);
  CHECK(fs::exists(foreign / "keep.txt"));
}

TEST_CASE("scene specs round trip through json and validate") {
  RandomSceneOptions opt;
  opt.max_sprites = 5;
  const SceneSpec s = random_scene(3, opt);
  const SceneSpec back = nlohmann::json(s).get<SceneSpec>();
  CHECK(nlohmann::json(back) == nlohmann::json(s));

  SceneSpec bad = scene_with({});
  bad.height = 50;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  SpriteSpec outside;
  outside.x0 = 90;
  CHECK_THROWS_AS(scene_with({outside}).validate(), ConfigError);
  CHECK_THROWS_AS(parse_background("stripes"), ConfigError);
  CHECK_THROWS_AS(parse_lighting("dusk"), ConfigError);
  opt.backgrounds.clear();
  CHECK_THROWS_AS(random_scene(1, opt), ConfigError);
}
