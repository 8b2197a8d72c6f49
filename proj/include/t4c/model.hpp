#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t4c/layers.hpp"

namespace t4c {

// Declarative description of one UNet instance.
//
// model_type 1: dense block -> average pool per encoder level; decoder is
//               deconv -> concat skip -> conv.
// model_type 2: dense block with a parallel stride-1 3x3 max filter feeding
//               the block's last conv; stride-2 conv pooling instead of
//               average pooling; decoder as type 1.
// model_type 3: stride-2 max pool first, dense block at the pooled
//               resolution; decoder runs a bilinear upsample in parallel to
//               the deconv and merges through a dense block.
struct ModelConfig {
  int model_type = 1;
  int input_h = 495, input_w = 436, input_c = 115;
  int levels = 8;
  std::vector<int> channels = {64, 96, 128, 128, 128, 128, 128, 128};
  int dense_layers = 4;  // L
  int growth = 16;       // g
  int out_channels = 48;
  bool use_static = true;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Per-level (h, w), level 0 = input resolution, level k+1 = ceil(level k / 2).
struct ShapeSchedule {
  std::vector<std::pair<int, int>> hw;
};

ShapeSchedule shape_schedule(int h, int w, int levels);

struct TraceRow {
  std::string label;
  Shape shape;
};

struct Model {
  ModelConfig config;
  Graph graph;
  int input_node = -1;
  int output_node = -1;  // (H, W, out_channels) prediction
  int target_node = -1;
  int loss_node = -1;
  std::vector<int> skip_nodes;  // one per encoder level 0..levels-2
  std::vector<TraceRow> trace;  // per-block output shapes, encoder to head
};

Model build_model(const ModelConfig& config);

}  // namespace t4c
