#pragma once

#include <string>
#include <vector>

#include "stylesplat/core/image.hpp"
#include "stylesplat/data/camera.hpp"
#include "stylesplat/data/scene.hpp"

namespace stylesplat {

struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> flow;    // h*w*2, (dx, dy) in pixels
  std::vector<uint8_t> valid; // h*w

  bool empty() const { return flow.empty(); }
  const float* at(int y, int x) const { return flow.data() + (static_cast<size_t>(y) * width + x) * 2; }
  bool is_valid(int y, int x) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
};

struct ViewSample {
  Image image;
  Camera camera;
  std::vector<float> depth;  // h*w, euclidean ray distance, kBackgroundDepth on miss
  FlowField flow_to_next;    // empty on the last frame of a trajectory
};

struct SceneRecord {
  std::string id;
  std::vector<Primitive> primitives;
  std::vector<ViewSample> views;
};

}  // namespace stylesplat
