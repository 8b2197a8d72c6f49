#include "t4c/model.hpp"

#include "t4c/kernels.hpp"

namespace t4c {

void ModelConfig::validate() const {
  check(model_type >= 1 && model_type <= 3,
        "model_type must be 1, 2 or 3, got " + std::to_string(model_type));
  check(levels >= 2, "levels must be >= 2");
  check(static_cast<int>(channels.size()) == levels,
        "channel schedule length " + std::to_string(channels.size()) + " != levels " +
            std::to_string(levels));
  for (int c : channels) check(c >= 1, "channel counts must be positive");
  check(input_h >= 1 && input_w >= 1 && input_c >= 1, "input shape invalid");
  check(dense_layers >= 0 && growth >= 1 && out_channels >= 1, "block hyperparameters invalid");
}

ShapeSchedule shape_schedule(int h, int w, int levels) {
  check(h >= 1 && w >= 1, "input extents must be >= 1");
  check(levels >= 1, "levels must be >= 1");
  ShapeSchedule s;
  s.hw.emplace_back(h, w);
  for (int k = 1; k < levels; ++k) {
    auto [ph, pw] = s.hw.back();
    s.hw.emplace_back(kernels::ceil_out(ph, 2), kernels::ceil_out(pw, 2));
  }
  return s;
}

namespace {

struct Builder {
  const ModelConfig& cfg;
  Model& m;
  ShapeSchedule sched;

  void trace(const std::string& label, int node) {
    m.trace.push_back({label, m.graph.node(node).out_shape});
  }

  // Encoder for types 1 and 2: block at level k, pooled to level k+1
  // (except the top block). The pre-pool activation is the skip source.
  void encode_flat() {
    Graph& g = m.graph;
    int cur = m.input_node;
    for (int k = 0; k < cfg.levels; ++k) {
      std::string prefix = "enc" + std::to_string(k);
      DenseBlockSpec spec{cfg.dense_layers, cfg.growth, cfg.channels[k]};
      int block;
      if (cfg.model_type == 1) {
        block = dense_block(g, cur, spec, prefix, "DenseBlock-" + std::to_string(k + 1));
      } else {
        int mf = g.max_filter3(cur);
        block = dense_block(g, cur, spec, prefix, "DenseBlock-" + std::to_string(k + 1), {mf});
      }
      trace("DenseBlock-" + std::to_string(k + 1), block);
      if (k == cfg.levels - 1) {
        cur = block;
        break;
      }
      m.skip_nodes.push_back(block);
      if (cfg.model_type == 1) {
        cur = g.avg_pool2(block, "AveragePooling");
        trace("AveragePooling", cur);
      } else {
        cur = conv_relu(g, block, cfg.channels[k], 3, 3, 2, prefix + "/pool", "ConvPooling");
        trace("ConvPooling", cur);
      }
    }
    bottleneck(cur);
  }

  // Encoder for type 3: stride-2 max pool first, dense block at the pooled
  // resolution. The block input, still at the finer level, is the skip.
  void encode_pool_first() {
    Graph& g = m.graph;
    int cur = m.input_node;
    for (int k = 0; k < cfg.levels; ++k) {
      std::string prefix = "enc" + std::to_string(k);
      DenseBlockSpec spec{cfg.dense_layers, cfg.growth, cfg.channels[k]};
      if (k < cfg.levels - 1) {
        m.skip_nodes.push_back(cur);
        int pooled = g.max_pool2(cur, "MaxPooling");
        trace("MaxPooling", pooled);
        cur = dense_block(g, pooled, spec, prefix, "DenseBlock-" + std::to_string(k + 1));
      } else {
        cur = dense_block(g, cur, spec, prefix, "DenseBlock-" + std::to_string(k + 1));
      }
      trace("DenseBlock-" + std::to_string(k + 1), cur);
    }
    bottleneck(cur);
  }

  void bottleneck(int cur) {
    cur = conv_relu(m.graph, cur, cfg.channels.back(), 3, 3, 1, "mid/conv", "Convolution Layer");
    trace("Convolution Layer", cur);
    decode(cur);
  }

  void decode(int cur) {
    Graph& g = m.graph;
    const int dec_ch = cfg.channels.back();
    for (int j = 0; j < cfg.levels - 1; ++j) {
      int level = cfg.levels - 2 - j;  // resolution this block produces
      auto [th, tw] = sched.hw[level];
      std::string prefix = "dec" + std::to_string(j);
      std::string label = "DeconvolutionBlock-" + std::to_string(j + 1);
      int skip = m.skip_nodes[level];
      int d = g.deconv2(cur, dec_ch, th, tw, prefix + "/deconv");
      d = g.relu(d);
      int block;
      if (cfg.model_type == 3) {
        int up = g.upsample_linear(cur, th, tw);
        int cat = g.concat({d, up, skip});
        block = dense_block(g, cat, {cfg.dense_layers, cfg.growth, dec_ch}, prefix, label);
      } else {
        int cat = g.concat({d, skip});
        block = g.conv2d(cat, dec_ch, 3, 3, 1, prefix + "/merge", label);
      }
      trace(label, block);
      cur = block;
    }
    m.output_node = g.conv2d(cur, cfg.out_channels, 1, 1, 1, "head", "Convolution Layer");
    // The regression head starts as the zero predictor; random head weights
    // put noise on the output that training first has to undo.
    g.zero_init_param("head/w");
    trace("Convolution Layer", m.output_node);
  }
};

}  // namespace

Model build_model(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  m.input_node = m.graph.input(Shape{config.input_h, config.input_w, config.input_c}, "input");
  Builder b{config, m, shape_schedule(config.input_h, config.input_w, config.levels)};
  if (config.model_type == 3)
    b.encode_pool_first();
  else
    b.encode_flat();
  m.target_node =
      m.graph.input(Shape{config.input_h, config.input_w, config.out_channels}, "target");
  m.loss_node = m.graph.mse(m.output_node, m.target_node, "loss");
  return m;
}

}  // namespace t4c
