#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace t4c {

struct GradCase {
  std::string op;
  double max_rel_err = 0.0;
};

const std::vector<std::string>& grad_suite_ops();

// Builds one small f64 graph per layer op (input wrapped as a differentiable
// leaf, mse head against a random target) and central-difference checks every
// parameter. op = "all" runs everything.
std::vector<GradCase> run_grad_suite(const std::string& op, uint64_t seed, double eps);

}  // namespace t4c
