#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t4c/tensor.hpp"
#include "t4c/train.hpp"

namespace t4c {

// One training/inference example on disk: a (12, H, W, 9) u8 dynamic frame
// stack and a (6, H, W, 8) u8 target stack. A (H, W, 7) u8 static map is
// shared across samples.
struct RawSample {
  Tensor dynamic;  // (12, H, W, 9) u8
  Tensor target;   // (6, H, W, 8) u8
};

struct SynthDataset {
  std::vector<RawSample> samples;
  Tensor static_map;  // (H, W, 7) u8
};

// (12, H, W, 9) u8 -> (H, W, 108) f32 in [0,1]; channel c = t*9 + f.
Tensor flatten_dynamic(const Tensor& dynamic);

// (6, H, W, 8) u8 -> (H, W, 48) f32 in [0,1]; channel c = t*8 + f.
Tensor flatten_target(const Tensor& target);

// flatten_dynamic output with the 7 static channels appended (scaled 1/255)
// when use_static is set.
Tensor assemble_input(const Tensor& dynamic, const Tensor& static_map, bool use_static);

// (H, W, 48) f32 -> (6, H, W, 8) f32: out(t,i,j,f) = raw(i,j,t*8+f).
Tensor reshape_output(const Tensor& raw);

// Inverse of reshape_output: (6, H, W, 8) f32 -> (H, W, 48) f32.
Tensor flatten_frames(const Tensor& frames);

// clamp(pred*255, 0, 255), rounded half away from zero.
Tensor quantize_output(const Tensor& pred);

// Deterministic moving-blob traffic movies. Targets are the time-shifted
// continuation of the dynamic frames (future bins +1,+2,+3,+6,+9,+12), so a
// model can learn the mapping. Values span 0..255.
SynthDataset synth_dataset(uint64_t seed, int n_samples, int h, int w);

// Directory layout: <dir>/<index>_dynamic.t4ct, <dir>/<index>_target.t4ct,
// <dir>/static.t4ct.
void write_dataset(const SynthDataset& ds, const std::string& dir);

struct LoadedDataset {
  int h = 0, w = 0;
  Tensor static_map;                // (H, W, 7) u8
  std::vector<Tensor> raw_targets;  // (6, H, W, 8) u8 per sample
  std::vector<TrainSample> samples; // assembled f32 input/target pairs
};

// With require_targets=false, missing target files leave raw_targets empty
// and samples carry undefined targets (inference-only data).
LoadedDataset load_dataset(const std::string& dir, bool use_static, bool require_targets = true);

}  // namespace t4c
