#pragma once

#include <array>
#include <random>

#include "mustan/metrics.hpp"

namespace mustan::testing {

// Per-pixel enumeration, written independently of the library.
struct OracleCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline OracleCounts oracle_counts(const Mask& pred, const Mask& target, const Mask& ignore) {
  OracleCounts c;
  for (Eigen::Index r = 0; r < pred.rows(); ++r)
    for (Eigen::Index k = 0; k < pred.cols(); ++k) {
      if (ignore(r, k) == 1) continue;
      const int p = pred(r, k) ? 1 : 0;
      const int t = target(r, k) ? 1 : 0;
      c.tp += p & t;
      c.fp += p & (1 - t);
      c.fn += (1 - p) & t;
      c.tn += (1 - p) & (1 - t);
    }
  return c;
}

// {precision, recall, specificity, f1} under the degenerate-denominator rule.
inline std::array<double, 4> oracle_scores(const OracleCounts& c) {
  const auto ratio = [](long good, long bad) {
    if (good + bad > 0) return static_cast<double>(good) / static_cast<double>(good + bad);
    return bad == 0 ? 1.0 : 0.0;
  };
  const double pr = ratio(c.tp, c.fp);
  const double re = ratio(c.tp, c.fn);
  const double sp = ratio(c.tn, c.fp);
  const double f1 = (pr + re) == 0 ? 0.0 : 2 * pr * re / (pr + re);
  return {pr, re, sp, f1};
}

struct MaskTriple {
  Mask pred, target, ignore;
};

// Random triples with per-triple densities so degenerate cases (empty
// targets, all-ignored frames) show up regularly.
inline MaskTriple random_triple(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0, 1);
  const double densities[] = {0.0, 0.05, 0.5, 0.95, 1.0};
  std::uniform_int_distribution<int> pick(0, 4);
  const double dp = densities[pick(rng)], dt = densities[pick(rng)];
  const double di = densities[pick(rng)] * 0.5 + (u(rng) < 0.05 ? 0.5 : 0.0);
  MaskTriple m{Mask(h, w), Mask(h, w), Mask(h, w)};
  for (Eigen::Index i = 0; i < m.pred.size(); ++i) {
    m.pred.data()[i] = u(rng) < dp;
    m.target.data()[i] = u(rng) < dt;
    m.ignore.data()[i] = u(rng) < di;
  }
  return m;
}

}  // namespace mustan::testing
