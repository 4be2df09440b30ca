#include <cmath>
#include <random>

#include "doctest.h"
#include "mustan/objective.hpp"

using namespace mustan;

namespace {

Tensor<double> row(std::initializer_list<double> v) {
  Tensor<double> t(Shape{1, 1, 1, static_cast<int>(v.size())});
  int i = 0;
  for (double x : v) t.data()[i++] = x;
  return t;
}

struct Maps {
  Tensor<double> p, y, ignore;
};

Maps random_maps(std::mt19937_64& rng, Shape s, double ignore_rate) {
  std::uniform_real_distribution<double> u(0, 1);
  Maps m{Tensor<double>(s), Tensor<double>(s), Tensor<double>(s)};
  for (Eigen::Index i = 0; i < m.p.size(); ++i) {
    m.p.data()[i] = u(rng);
    m.y.data()[i] = u(rng) < 0.4 ? 1 : 0;
    m.ignore.data()[i] = u(rng) < ignore_rate ? 1 : 0;
  }
  return m;
}

// Soft Dice over valid pixels with the same smoothing: (2I + 2e) / (Sp + Sy + 2e).
double soft_dice(const Maps& m, double eps) {
  double inter = 0, sp = 0, sy = 0;
  for (Eigen::Index i = 0; i < m.p.size(); ++i) {
    if (m.ignore.data()[i] != 0) continue;
    inter += m.p.data()[i] * m.y.data()[i];
    sp += m.p.data()[i];
    sy += m.y.data()[i];
  }
  return (2 * inter + 2 * eps) / (sp + sy + 2 * eps);
}

double masked_bce(const Maps& m, double eps) {
  double sum = 0;
  int n = 0;
  for (Eigen::Index i = 0; i < m.p.size(); ++i) {
    if (m.ignore.data()[i] != 0) continue;
    const double p = std::clamp(m.p.data()[i], eps, 1 - eps);
    const double y = m.y.data()[i];
    sum += -(y * std::log(p) + (1 - y) * std::log(1 - p));
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST_CASE("tversky anchor values") {
  LossConfig cfg;
  const auto y = row({1, 1, 0, 0});
  const auto p = row({1, 0, 1, 0});
  const auto none = row({0, 0, 0, 0});
  // TP = FP = FN = 1.
  const double eps = cfg.epsilon;
  CHECK(tversky_loss(p, y, none, cfg).value == doctest::Approx(1 - (1 + eps) / (2 + eps)).epsilon(1e-15));
  LossConfig tiny = cfg;
  tiny.epsilon = 1e-300;
  CHECK(tversky_loss(p, y, none, tiny).value == 0.5);
  CHECK(tversky_loss(y, y, none, cfg).value == 0.0);
}

TEST_CASE("symmetric tversky equals one minus soft dice") {
  std::mt19937_64 rng(1);
  LossConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    const Maps m = random_maps(rng, Shape{2, 1, 8, 8}, 0.2);
    CHECK(std::abs(tversky_loss(m.p, m.y, m.ignore, cfg).value - (1 - soft_dice(m, cfg.epsilon))) < 1e-12);
  }
}

TEST_CASE("bce values") {
  LossConfig cfg;
  const auto none = row({0});
  CHECK(std::abs(bce_loss(row({0.5}), row({1}), none, cfg).value - std::log(2.0)) < 1e-12);
  CHECK(bce_loss(row({1, 0}), row({1, 0}), row({0, 0}), cfg).value <= 1e-5);

  std::mt19937_64 rng(2);
  const Maps m = random_maps(rng, Shape{1, 1, 8, 8}, 0.5);
  CHECK(bce_loss(m.p, m.y, m.ignore, cfg).value == doctest::Approx(masked_bce(m, cfg.epsilon)).epsilon(1e-12));
}

TEST_CASE("combined loss endpoints and bounds") {
  std::mt19937_64 rng(3);
  const Maps m = random_maps(rng, Shape{1, 1, 8, 8}, 0.1);
  LossConfig cfg;
  const auto tl = tversky_loss(m.p, m.y, m.ignore, cfg);
  const auto bce = bce_loss(m.p, m.y, m.ignore, cfg);
  const auto mix = combined_loss(m.p, m.y, m.ignore, cfg);
  CHECK(mix.value == doctest::Approx(0.5 * tl.value + 0.5 * bce.value).epsilon(1e-14));
  CHECK(mix.value >= 0);

  cfg.theta = 0;
  CHECK(combined_loss(m.p, m.y, m.ignore, cfg).value == bce.value);
  CHECK((combined_loss(m.p, m.y, m.ignore, cfg).grad.array() == bce.grad.array()).all());
  cfg.theta = 1;
  CHECK(combined_loss(m.p, m.y, m.ignore, cfg).value == tl.value);

  LossConfig bad;
  bad.theta = 1.5;
  CHECK_THROWS_AS(combined_loss(m.p, m.y, m.ignore, bad), ConfigError);
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(4);
  for (const LossConfig cfg : {LossConfig{}, LossConfig{0.3, 0.7, 0.2, 1e-6}, LossConfig{1, 0.5, 0.5, 1e-6},
                               LossConfig{0, 0.5, 0.5, 1e-6}}) {
    Maps m = random_maps(rng, Shape{1, 1, 8, 8}, 0.2);
    // Keep p away from the BCE clamp so the loss is smooth under the step.
    m.p.array() = 0.05 + 0.9 * m.p.array();
    const auto analytic = combined_loss(m.p, m.y, m.ignore, cfg).grad;
    const double h = 1e-4;
    double worst = 0;
    for (Eigen::Index i = 0; i < m.p.size(); ++i) {
      const double x0 = m.p.data()[i];
      m.p.data()[i] = x0 + h;
      const double fp = combined_loss(m.p, m.y, m.ignore, cfg).value;
      m.p.data()[i] = x0 - h;
      const double fm = combined_loss(m.p, m.y, m.ignore, cfg).value;
      m.p.data()[i] = x0;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic.data()[i];
      if (m.ignore.data()[i] != 0) {
        CHECK(a == 0.0);
        CHECK(std::abs(numeric) < 1e-12);
        continue;
      }
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8}));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("ignored pixels do not affect the loss") {
  std::mt19937_64 rng(5);
  LossConfig cfg;
  Maps m = random_maps(rng, Shape{2, 1, 6, 6}, 0.3);
  const double before = combined_loss(m.p, m.y, m.ignore, cfg).value;
  for (Eigen::Index i = 0; i < m.p.size(); ++i)
    if (m.ignore.data()[i] != 0) {
      m.p.data()[i] = 1 - m.p.data()[i];
      m.y.data()[i] = 1 - m.y.data()[i];
    }
  CHECK(combined_loss(m.p, m.y, m.ignore, cfg).value == before);
}

TEST_CASE("all-ignored batches are flagged degenerate") {
  LossConfig cfg;
  const auto all = row({1, 1});
  const auto r = combined_loss(row({0.2, 0.9}), row({1, 0}), all, cfg);
  CHECK(r.degenerate);
  CHECK(r.value == 0);
  CHECK((r.grad.array() == 0).all());
}

TEST_CASE("shape mismatch throws") {
  LossConfig cfg;
  CHECK_THROWS_AS(tversky_loss(row({1, 0}), row({1}), row({0, 0}), cfg), ShapeError);
}
