#pragma once

#include <string>
#include <vector>

#include "mustan/tensor.hpp"

namespace mustan {

// One supervised frame and its causal temporal window. Frame numbers are
// 1-based positions within the video; the last window entry is the current
// frame.
struct ClipRef {
  std::string video_id;
  int current_index = 0;
  std::vector<int> window_indices;

  friend bool operator==(const ClipRef&, const ClipRef&) = default;
};

struct ClipSample {
  std::vector<TensorF> frames;  // T tensors of shape 1 x 3 x H x W in [0, 1]
  Mask target;                  // H x W, {0, 1}
  Mask ignore;                  // H x W, 1 = excluded from loss and metrics
  ClipRef meta;

  int height() const { return static_cast<int>(target.rows()); }
  int width() const { return static_cast<int>(target.cols()); }
  int window() const { return static_cast<int>(frames.size()); }
};

// Clips stacked for a forward pass: window frames channel-wise
// (oldest..current), targets and ignore maps as N x 1 x H x W.
template <typename Scalar>
struct ClipBatch {
  Tensor<Scalar> window;
  Tensor<Scalar> target;
  Tensor<Scalar> ignore;
};

template <typename Scalar>
ClipBatch<Scalar> stack_clips(const std::vector<const ClipSample*>& clips) {
  if (clips.empty()) throw ShapeError("stack_clips: empty batch");
  const int T = clips.front()->window();
  const int H = clips.front()->height();
  const int W = clips.front()->width();
  const int N = static_cast<int>(clips.size());
  ClipBatch<Scalar> batch{Tensor<Scalar>(Shape{N, 3 * T, H, W}), Tensor<Scalar>(Shape{N, 1, H, W}),
                          Tensor<Scalar>(Shape{N, 1, H, W})};
  for (int n = 0; n < N; ++n) {
    const ClipSample& clip = *clips[n];
    if (clip.window() != T || clip.height() != H || clip.width() != W)
      throw ShapeError("stack_clips: clip " + clip.meta.video_id + " has a different geometry");
    for (int t = 0; t < T; ++t) {
      const TensorF& frame = clip.frames[t];
      if (frame.shape() != Shape{1, 3, H, W})
        throw ShapeError("stack_clips: frame shape " + frame.shape().str());
      batch.window.sample(n).middleRows(3 * t, 3) = frame.sample(0).template cast<Scalar>();
    }
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(batch.target.plane_data(n, 0), H * W) =
        Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(clip.target.data(), H * W)
            .template cast<Scalar>();
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(batch.ignore.plane_data(n, 0), H * W) =
        Eigen::Map<const Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>>(clip.ignore.data(), H * W)
            .template cast<Scalar>();
  }
  return batch;
}

}  // namespace mustan
