#include "segrobust/harness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "segrobust/core/image_io.hpp"
#include "segrobust/core/rng.hpp"
#include "segrobust/corruptions/kernels.hpp"

namespace segrobust {

namespace {

Plane<double> texture(Index h, Index w, double decay, DeterministicRng& rng) {
  Index size = 8;
  while (size < std::max(h, w)) size *= 2;
  return kernels::plasma_fractal(size, decay, rng).topLeftCorner(h, w);
}

BinaryMask draw_shape(Index h, Index w, DeterministicRng& rng) {
  const double side = static_cast<double>(std::min(h, w));
  // Spread sizes over a wide range so the big and small halves differ.
  const double ry = std::max(1.0, side * rng.uniform(0.06, 0.22));
  const double rx = std::max(1.0, side * rng.uniform(0.06, 0.22));
  const double cy = rng.uniform(ry, static_cast<double>(h) - ry);
  const double cx = rng.uniform(rx, static_cast<double>(w) - rx);
  const auto shape = rng.below(3);
  const double phase = rng.uniform(0.0, 2 * std::numbers::pi);
  const double wobble = rng.uniform(0.15, 0.35);
  BinaryMask m(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
      const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
      bool in = false;
      if (shape == 0) {
        in = std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
      } else if (shape == 1) {
        in = dy * dy + dx * dx <= 1.0;
      } else {
        const double radius = 1.0 + wobble * std::sin(3.0 * std::atan2(dy, dx) + phase);
        in = std::sqrt(dy * dy + dx * dx) <= radius;
      }
      m(y, x) = in;
    }
  return m;
}

// Mask grown by one pixel in the 8-neighbourhood, so shapes keep a gap.
BinaryMask dilate(const BinaryMask& m) {
  BinaryMask out = m;
  for (Index y = 0; y < m.rows(); ++y)
    for (Index x = 0; x < m.cols(); ++x) {
      if (!m(y, x)) continue;
      for (Index dy = -1; dy <= 1; ++dy)
        for (Index dx = -1; dx <= 1; ++dx) {
          const Index yy = y + dy, xx = x + dx;
          if (yy >= 0 && xx >= 0 && yy < m.rows() && xx < m.cols()) out(yy, xx) = true;
        }
    }
  return out;
}

}  // namespace

AnnotatedImage synth_image(std::uint64_t seed, Index height, Index width, const std::string& id) {
  if (height < 4 || width < 4) throw ConfigInvalid("synthetic images must be at least 4x4");
  DeterministicRng rng(seed);
  AnnotatedImage rec;
  rec.id = id;
  rec.image = ImageTensor(height, width);

  const Plane<double> bg = texture(height, width, 2.0, rng);
  const double base[3] = {rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5)};
  for (Index c = 0; c < 3; ++c) rec.image.channel(c) = base[c] + 0.35 * (bg - 0.5);

  const auto wanted = static_cast<std::size_t>(2 + rng.below(4));
  BinaryMask occupied = BinaryMask::Constant(height, width, false);
  for (int attempt = 0; attempt < 200 && rec.annotations.size() < wanted; ++attempt) {
    BinaryMask m = draw_shape(height, width, rng);
    const Index area = m.count();
    if (area == 0 || area == height * width || (m && occupied).any()) continue;
    occupied = occupied || dilate(m);
    rec.annotations.push_back({m, area});
  }
  // Tiny images may not fit two random shapes; fall back to two corner blocks.
  if (rec.annotations.size() < 2) {
    rec.annotations.clear();
    BinaryMask a = BinaryMask::Constant(height, width, false), b = a;
    a.topLeftCorner(height / 2 - 1, width / 2 - 1).setConstant(true);
    b.bottomRightCorner(height / 4, width / 4).setConstant(true);
    rec.annotations.push_back({a, a.count()});
    rec.annotations.push_back({b, b.count()});
  }

  for (const auto& a : rec.annotations) {
    const Plane<double> tex = texture(height, width, 1.5, rng);
    const double tint[3] = {rng.uniform(0.55, 0.95), rng.uniform(0.55, 0.95), rng.uniform(0.55, 0.95)};
    for (Index c = 0; c < 3; ++c) {
      Plane<double> ch = rec.image.channel(c);
      ch = a.mask.select(tint[c] + 0.2 * (tex - 0.5), ch);
      rec.image.channel(c) = ch;
    }
  }
  rec.image = quantize_8bit(clamp01(std::move(rec.image)));
  rec.validate();
  return rec;
}

std::vector<AnnotatedImage> synth_images(const SynthOptions& options) {
  if (options.images < 1) throw ConfigInvalid("synth: at least one image is required");
  std::vector<AnnotatedImage> out;
  for (std::size_t i = 0; i < options.images; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", i);
    out.push_back(synth_image(derive_seed(options.seed, i), options.height, options.width, id));
  }
  return out;
}

DatasetManifest synth_dataset(const SynthOptions& options, const std::filesystem::path& dir) {
  const auto images = synth_images(options);
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (!ec) std::filesystem::create_directories(dir / "masks", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = dir;
  for (const auto& rec : images) {
    ManifestRecord mr;
    mr.id = rec.id;
    mr.image_path = "images/" + rec.id + ".png";
    write_png_rgb(dir / mr.image_path, rec.image);
    for (std::size_t k = 0; k < rec.annotations.size(); ++k) {
      MaskEntry e;
      e.mask_path = "masks/" + rec.id + "_" + std::to_string(k) + ".png";
      e.area_px = rec.annotations[k].area;
      write_png_mask(dir / e.mask_path, rec.annotations[k].mask);
      mr.masks.push_back(e);
    }
    manifest.records.push_back(std::move(mr));
  }
  save_manifest(manifest, dir / "manifest.json");
  return manifest;
}

}  // namespace segrobust
