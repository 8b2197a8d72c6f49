#include "t4c/layers.hpp"

namespace t4c {

int conv_relu(Graph& g, int x, int out_channels, int kh, int kw, int stride,
              const std::string& name, std::string label) {
  int c = g.conv2d(x, out_channels, kh, kw, stride, name);
  return g.relu(c, std::move(label));
}

int dense_block(Graph& g, int x, const DenseBlockSpec& spec, const std::string& prefix,
                std::string label, const std::vector<int>& extra_transition_inputs) {
  check(spec.num_layers >= 0 && spec.growth >= 1 && spec.out_channels >= 1,
        "dense block spec invalid");
  std::vector<int> feeds = {x};
  for (int i = 0; i < spec.num_layers; ++i) {
    int in = feeds.size() == 1 ? feeds[0] : g.concat(feeds);
    int y = conv_relu(g, in, spec.growth, 3, 3, 1, prefix + "/conv" + std::to_string(i));
    feeds.push_back(y);
  }
  for (int e : extra_transition_inputs) feeds.push_back(e);
  int trans_in = feeds.size() == 1 ? feeds[0] : g.concat(feeds);
  return g.conv2d(trans_in, spec.out_channels, 1, 1, 1, prefix + "/trans", std::move(label));
}

}  // namespace t4c
