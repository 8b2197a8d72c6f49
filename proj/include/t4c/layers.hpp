#pragma once

#include <string>
#include <vector>

#include "t4c/graph.hpp"

namespace t4c {

// Dense convolution block: layer i consumes in_channels + i*growth channels
// and emits growth channels; a final 1x1 transition conv maps the full
// concatenation to out_channels.
struct DenseBlockSpec {
  int num_layers = 4;   // L
  int growth = 16;      // g
  int out_channels = 0;
};

// conv + relu convenience.
int conv_relu(Graph& g, int x, int out_channels, int kh, int kw, int stride,
              const std::string& name, std::string label = {});

// Builds the dense block subgraph and returns the transition conv node.
// Internal 3x3 convs carry ReLU; the transition conv is linear.
// extra_transition_inputs join the final concatenation before the
// transition conv (used by the encoder variant with a parallel max filter).
int dense_block(Graph& g, int x, const DenseBlockSpec& spec, const std::string& prefix,
                std::string label = {},
                const std::vector<int>& extra_transition_inputs = {});

}  // namespace t4c
