#include "t4c/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "t4c/rng.hpp"
#include "t4c/tensor_io.hpp"

namespace t4c {

namespace {

void expect_rank4(const Tensor& t, int d0, int d3, const char* what) {
  check(t.shape().rank() == 4, std::string(what) + " must be rank 4, got " + t.shape().str());
  check(t.shape()[0] == d0 && t.shape()[3] == d3,
        std::string(what) + " must be (" + std::to_string(d0) + ", H, W, " + std::to_string(d3) +
            "), got " + t.shape().str());
}

// (T, H, W, F) u8 -> (H, W, T*F) f32 scaled by 1/255, c = t*F + f.
Tensor flatten_u8(const Tensor& in) {
  const int tt = in.shape()[0], h = in.shape()[1], w = in.shape()[2], f = in.shape()[3];
  Tensor out(Shape{h, w, tt * f}, DType::f32);
  auto src = in.u8();
  auto dst = out.f32();
  const float inv = 1.0f / 255.0f;
  for (int t = 0; t < tt; ++t)
    for (int64_t px = 0; px < int64_t{h} * w; ++px) {
      const uint8_t* s = src.data() + (t * int64_t{h} * w + px) * f;
      float* d = dst.data() + px * (tt * f) + t * f;
      for (int c = 0; c < f; ++c) d[c] = s[c] * inv;
    }
  return out;
}

}  // namespace

Tensor flatten_dynamic(const Tensor& dynamic) {
  expect_rank4(dynamic, 12, 9, "dynamic frame");
  check(dynamic.dtype() == DType::u8, "dynamic frame must be u8");
  return flatten_u8(dynamic);
}

Tensor flatten_target(const Tensor& target) {
  expect_rank4(target, 6, 8, "target frame");
  check(target.dtype() == DType::u8, "target frame must be u8");
  return flatten_u8(target);
}

Tensor assemble_input(const Tensor& dynamic, const Tensor& static_map, bool use_static) {
  Tensor flat = flatten_dynamic(dynamic);
  if (!use_static) return flat;
  check(static_map.shape().rank() == 3 && static_map.shape()[2] == 7,
        "static map must be (H, W, 7), got " + static_map.shape().str());
  check(static_map.dtype() == DType::u8, "static map must be u8");
  check(static_map.shape()[0] == flat.shape()[0] && static_map.shape()[1] == flat.shape()[1],
        "static map spatial mismatch: " + static_map.shape().str() + " vs dynamic " +
            flat.shape().str());
  Tensor stat_f(static_map.shape(), DType::f32);
  auto src = static_map.u8();
  auto dst = stat_f.f32();
  for (int64_t i = 0; i < static_map.count(); ++i) dst[i] = src[i] / 255.0f;
  return concat_channels(flat, stat_f);
}

Tensor reshape_output(const Tensor& raw) {
  check(raw.shape().rank() == 3 && raw.shape()[2] == 48,
        "raw output must be (H, W, 48), got " + raw.shape().str());
  check(raw.dtype() == DType::f32, "raw output must be f32");
  const int h = raw.shape()[0], w = raw.shape()[1];
  Tensor out(Shape{6, h, w, 8}, DType::f32);
  auto src = raw.f32();
  auto dst = out.f32();
  for (int t = 0; t < 6; ++t)
    for (int64_t px = 0; px < int64_t{h} * w; ++px) {
      const float* s = src.data() + px * 48 + t * 8;
      float* d = dst.data() + (t * int64_t{h} * w + px) * 8;
      for (int f = 0; f < 8; ++f) d[f] = s[f];
    }
  return out;
}

Tensor flatten_frames(const Tensor& frames) {
  expect_rank4(frames, 6, 8, "prediction frames");
  check(frames.dtype() == DType::f32, "prediction frames must be f32");
  const int h = frames.shape()[1], w = frames.shape()[2];
  Tensor out(Shape{h, w, 48}, DType::f32);
  auto src = frames.f32();
  auto dst = out.f32();
  for (int t = 0; t < 6; ++t)
    for (int64_t px = 0; px < int64_t{h} * w; ++px) {
      const float* s = src.data() + (t * int64_t{h} * w + px) * 8;
      float* d = dst.data() + px * 48 + t * 8;
      for (int f = 0; f < 8; ++f) d[f] = s[f];
    }
  return out;
}

Tensor quantize_output(const Tensor& pred) {
  check(pred.dtype() == DType::f32, "quantize expects f32 predictions");
  Tensor out(pred.shape(), DType::u8);
  auto src = pred.f32();
  auto dst = out.u8();
  for (int64_t i = 0; i < pred.count(); ++i) {
    float v = std::clamp(src[i] * 255.0f, 0.0f, 255.0f);
    dst[i] = static_cast<uint8_t>(std::lround(v));
  }
  return out;
}

namespace {

struct Blob {
  double y, x;    // center at movie start
  double vy, vx;  // px per time bin
  double sigma;
  double volume;         // peak volume amplitude, 0..1
  double speed;          // peak speed amplitude, 0..1
  double heading_w[4];   // per-quadrant weight, 0..1
};

// One movie time bin rendered into 8 channels (+incident for inputs).
void render_bin(const std::vector<Blob>& blobs, int time, int h, int w, uint8_t* out,
                int channels) {
  for (int64_t i = 0; i < int64_t{h} * w * channels; ++i) out[i] = 0;
  for (const Blob& b : blobs) {
    double cy = b.y + b.vy * time;
    double cx = b.x + b.vx * time;
    double inv2s = 1.0 / (2.0 * b.sigma * b.sigma);
    int y0 = std::max(0, static_cast<int>(cy - 4 * b.sigma));
    int y1 = std::min(h - 1, static_cast<int>(cy + 4 * b.sigma));
    int x0 = std::max(0, static_cast<int>(cx - 4 * b.sigma));
    int x1 = std::min(w - 1, static_cast<int>(cx + 4 * b.sigma));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        double bump = std::exp(-d2 * inv2s);
        uint8_t* px = out + (int64_t{y} * w + x) * channels;
        for (int q = 0; q < 4; ++q) {
          double vol = 255.0 * b.volume * b.heading_w[q] * bump;
          double spd = 255.0 * b.speed * b.heading_w[q] * bump;
          px[2 * q] = static_cast<uint8_t>(std::min(255.0, px[2 * q] + vol));
          px[2 * q + 1] = static_cast<uint8_t>(std::min(255.0, px[2 * q + 1] + spd));
        }
        if (channels == 9) {
          double inc = 255.0 * 0.5 * b.volume * bump;
          px[8] = static_cast<uint8_t>(std::min(255.0, px[8] + inc));
        }
      }
  }
}

}  // namespace

SynthDataset synth_dataset(uint64_t seed, int n_samples, int h, int w) {
  check(h >= 7 && w >= 7, "synthetic dataset needs H, W >= 7");
  check(n_samples >= 0, "n_samples must be >= 0");
  Rng rng(seed);
  SynthDataset ds;

  // Static map: smooth seeded ridges, one phase per channel.
  ds.static_map = Tensor(Shape{h, w, 7}, DType::u8);
  {
    auto sm = ds.static_map.u8();
    double ay[7], ax[7], ph[7];
    for (int c = 0; c < 7; ++c) {
      ay[c] = rng.uniform(0.05, 0.35);
      ax[c] = rng.uniform(0.05, 0.35);
      ph[c] = rng.uniform(0.0, 6.28318);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 7; ++c) {
          double v = 0.5 + 0.5 * std::sin(ay[c] * y + ax[c] * x + ph[c]);
          sm[(int64_t{y} * w + x) * 7 + c] = static_cast<uint8_t>(std::lround(255.0 * v));
        }
  }

  // Future bins relative to the last input frame: +5..+60 minutes.
  const int target_offsets[6] = {12, 13, 14, 17, 20, 23};

  for (int s = 0; s < n_samples; ++s) {
    std::vector<Blob> blobs(2);
    for (Blob& b : blobs) {
      b.y = rng.uniform(0.25 * h, 0.75 * h);
      b.x = rng.uniform(0.25 * w, 0.75 * w);
      b.vy = rng.uniform(-0.15, 0.15);
      b.vx = rng.uniform(-0.15, 0.15);
      b.sigma = rng.uniform(2.0, 3.0);
      b.volume = rng.uniform(0.15, 0.3);
      b.speed = rng.uniform(0.1, 0.25);
      // Mass concentrated in the quadrant the blob moves toward.
      double base[4];
      base[0] = (b.vy < 0 && b.vx >= 0) ? 1.0 : 0.2;  // NE
      base[1] = (b.vy < 0 && b.vx < 0) ? 1.0 : 0.2;   // NW
      base[2] = (b.vy >= 0 && b.vx >= 0) ? 1.0 : 0.2; // SE
      base[3] = (b.vy >= 0 && b.vx < 0) ? 1.0 : 0.2;  // SW
      for (int q = 0; q < 4; ++q) b.heading_w[q] = base[q];
    }
    RawSample sample;
    sample.dynamic = Tensor(Shape{12, h, w, 9}, DType::u8);
    sample.target = Tensor(Shape{6, h, w, 8}, DType::u8);
    for (int t = 0; t < 12; ++t)
      render_bin(blobs, t, h, w, sample.dynamic.u8().data() + int64_t{t} * h * w * 9, 9);
    for (int t = 0; t < 6; ++t)
      render_bin(blobs, target_offsets[t], h, w, sample.target.u8().data() + int64_t{t} * h * w * 8,
                 8);
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

void write_dataset(const SynthDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_tensor(ds.static_map, dir + "/static.t4ct");
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    write_tensor(ds.samples[i].dynamic, dir + "/" + std::to_string(i) + "_dynamic.t4ct");
    write_tensor(ds.samples[i].target, dir + "/" + std::to_string(i) + "_target.t4ct");
  }
}

LoadedDataset load_dataset(const std::string& dir, bool use_static, bool require_targets) {
  check(std::filesystem::is_directory(dir), "not a directory: " + dir);
  LoadedDataset out;
  out.static_map = read_tensor(dir + "/static.t4ct");
  check(out.static_map.shape().rank() == 3 && out.static_map.shape()[2] == 7,
        dir + "/static.t4ct: expected (H, W, 7)");
  out.h = out.static_map.shape()[0];
  out.w = out.static_map.shape()[1];
  for (int i = 0;; ++i) {
    std::string dyn_path = dir + "/" + std::to_string(i) + "_dynamic.t4ct";
    if (!std::filesystem::exists(dyn_path)) break;
    Tensor dynamic = read_tensor(dyn_path);
    check(dynamic.shape()[1] == out.h && dynamic.shape()[2] == out.w,
          dyn_path + ": spatial extents do not match static map");
    TrainSample s;
    s.input = assemble_input(dynamic, out.static_map, use_static);
    std::string tgt_path = dir + "/" + std::to_string(i) + "_target.t4ct";
    if (require_targets || std::filesystem::exists(tgt_path)) {
      Tensor target = read_tensor(tgt_path);
      s.target = flatten_target(target);
      out.raw_targets.push_back(std::move(target));
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace t4c
