#include "segrobust/corruptions/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "segrobust/core/rng.hpp"
#include "segrobust/corruptions/kernels.hpp"

namespace segrobust {

namespace {

using kernels::Tap;

constexpr std::array<const char*, 15> kNames = {
    "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur", "glass_blur",
    "motion_blur",    "zoom_blur",  "snow",          "frost",        "fog",
    "brightness",     "contrast",   "elastic",       "pixelate",     "jpeg",
};

void require_kernel_fits(Index extent, const ImageTensor& image, CorruptionKind kind) {
  if (extent > std::min(image.height(), image.width()))
    throw KernelLargerThanImage(std::string(to_string(kind)) + ": kernel extent " + std::to_string(extent) +
                                " exceeds image size " + std::to_string(image.height()) + "x" +
                                std::to_string(image.width()));
}

ImageTensor gaussian_noise(const ImageTensor& in, double sigma, DeterministicRng& rng) {
  ImageTensor out = in;
  for (Index i = 0; i < out.size(); ++i) out.data()[i] += sigma * rng.gaussian();
  return out;
}

ImageTensor shot_noise(const ImageTensor& in, double lambda, DeterministicRng& rng) {
  ImageTensor out = in;
  for (Index i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<double>(rng.poisson(in.data()[i] * lambda)) / lambda;
  return out;
}

ImageTensor impulse_noise(const ImageTensor& in, double amount, DeterministicRng& rng) {
  ImageTensor out = in;
  for (Index i = 0; i < out.size(); ++i)
    if (rng.uniform() < amount) out.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  return out;
}

ImageTensor glass_blur(const ImageTensor& in, double sigma, int max_delta, int iterations, DeterministicRng& rng) {
  require_kernel_fits(2 * kernels::gaussian_radius(sigma) + 1, in, CorruptionKind::GlassBlur);
  require_kernel_fits(2 * max_delta + 2, in, CorruptionKind::GlassBlur);
  ImageTensor x = kernels::gaussian_blur(in, sigma);
  const Index h = x.height(), w = x.width();
  for (int it = 0; it < iterations; ++it)
    for (Index r = h - max_delta; r > max_delta; --r)
      for (Index c = w - max_delta; c > max_delta; --c) {
        const Index dx = -max_delta + static_cast<Index>(rng.below(2 * max_delta));
        const Index dy = -max_delta + static_cast<Index>(rng.below(2 * max_delta));
        for (Index ch = 0; ch < 3; ++ch) std::swap(x(r, c, ch), x(r + dy, c + dx, ch));
      }
  return kernels::gaussian_blur(x, sigma);
}

ImageTensor zoom_blur(const ImageTensor& in, double zoom_max, double zoom_step) {
  ImageTensor acc = in;
  int n = 0;
  for (int i = 0;; ++i) {
    const double z = 1.0 + i * zoom_step;
    if (z >= zoom_max - 1e-9) break;
    acc.pixels() += kernels::zoom_center(in, z).pixels();
    ++n;
  }
  acc.pixels() /= static_cast<double>(n + 1);
  return acc;
}

ImageTensor snow(const ImageTensor& in, const CorruptionParamTable::Params& p, DeterministicRng& rng) {
  const int radius = static_cast<int>(p.at("blur_radius"));
  require_kernel_fits(2 * radius + 1, in, CorruptionKind::Snow);
  const Index h = in.height(), w = in.width();
  Plane<double> layer(h, w);
  for (Index i = 0; i < layer.size(); ++i) layer(i) = p.at("loc") + p.at("scale") * rng.gaussian();
  layer = kernels::zoom_center(layer, p.at("zoom"));
  layer = (layer < p.at("threshold")).select(0.0, layer).max(0.0).min(1.0);
  const double angle = rng.uniform(-135.0, -45.0);
  layer = kernels::apply_taps(layer, kernels::motion_taps(radius, p.at("blur_sigma"), angle), true);
  const Plane<double> rotated = layer.reverse();

  const double blend = p.at("blend");
  const Plane<double> lifted = kernels::luma(in) * 1.5 + 0.5;
  ImageTensor out(h, w);
  for (Index c = 0; c < 3; ++c) {
    const Plane<double> x = in.channel(c);
    out.channel(c) = blend * x + (1 - blend) * x.max(lifted) + layer + rotated;
  }
  return out;
}

// Procedural ice texture: fractal haze plus short bright crystal strokes.
ImageTensor frost_texture(Index h, Index w, DeterministicRng& rng) {
  Index size = 256;
  while (size < std::max(h, w)) size *= 2;
  const Plane<double> haze = kernels::plasma_fractal(size, 1.6, rng).topLeftCorner(h, w);
  Plane<double> crystals = Plane<double>::Zero(h, w);
  const Index strokes = std::max<Index>(1, h * w / 24);
  for (Index s = 0; s < strokes; ++s) {
    double y = rng.uniform(0.0, static_cast<double>(h)), x = rng.uniform(0.0, static_cast<double>(w));
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double length = rng.uniform(2.0, 8.0);
    const double intensity = rng.uniform(0.5, 1.0);
    for (double t = 0; t <= length; t += 0.5) {
      const Index yy = static_cast<Index>(y + t * std::sin(theta)), xx = static_cast<Index>(x + t * std::cos(theta));
      if (yy >= 0 && yy < h && xx >= 0 && xx < w) crystals(yy, xx) = std::max(crystals(yy, xx), intensity);
    }
  }
  crystals = kernels::gaussian_blur(crystals, 0.6);
  const Plane<double> frost = (0.45 * haze + 0.8 * crystals).min(1.0);
  ImageTensor out(h, w);
  out.channel(0) = 0.86 * frost;
  out.channel(1) = 0.93 * frost;
  out.channel(2) = frost;
  return out;
}

ImageTensor fog(const ImageTensor& in, double scale, double decay, DeterministicRng& rng) {
  Index size = 256;
  while (size < std::max(in.height(), in.width())) size *= 2;
  const Plane<double> plasma = kernels::plasma_fractal(size, decay, rng).topLeftCorner(in.height(), in.width());
  const double max_val = in.pixels().maxCoeff();
  ImageTensor out(in.height(), in.width());
  for (Index c = 0; c < 3; ++c) out.channel(c) = in.channel(c) + scale * plasma;
  out.pixels() *= max_val / (max_val + scale);
  return out;
}

ImageTensor brightness(const ImageTensor& in, double shift) {
  ImageTensor out(in.height(), in.width());
  for (Index y = 0; y < in.height(); ++y)
    for (Index x = 0; x < in.width(); ++x) {
      auto [hh, s, v] = kernels::rgb_to_hsv(in(y, x, 0), in(y, x, 1), in(y, x, 2));
      v = std::clamp(v + shift, 0.0, 1.0);
      const auto rgb = kernels::hsv_to_rgb(hh, s, v);
      for (Index c = 0; c < 3; ++c) out(y, x, c) = rgb[c];
    }
  return out;
}

ImageTensor contrast(const ImageTensor& in, double factor) {
  ImageTensor out(in.height(), in.width());
  for (Index c = 0; c < 3; ++c) {
    const double mean = in.channel(c).mean();
    out.channel(c) = (in.channel(c) - mean) * factor + mean;
  }
  return out;
}

ImageTensor elastic(const ImageTensor& in, double alpha_frac, double sigma_frac, DeterministicRng& rng) {
  const Index h = in.height(), w = in.width();
  const double side = static_cast<double>(std::min(h, w));
  auto displacement = [&] {
    Plane<double> d(h, w);
    for (Index i = 0; i < d.size(); ++i) d(i) = rng.uniform(-1.0, 1.0);
    return (kernels::gaussian_blur(d, sigma_frac * side, 3.0) * (alpha_frac * side)).eval();
  };
  const Plane<double> dx = displacement();
  const Plane<double> dy = displacement();
  ImageTensor out(h, w);
  for (Index c = 0; c < 3; ++c) {
    const Plane<double> src = in.channel(c);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) out(y, x, c) = kernels::sample_bilinear(src, y + dy(y, x), x + dx(y, x));
  }
  return out;
}

ImageTensor pixelate(const ImageTensor& in, Index block) {
  ImageTensor out(in.height(), in.width());
  for (Index by = 0; by < in.height(); by += block)
    for (Index bx = 0; bx < in.width(); bx += block) {
      const Index bh = std::min(block, in.height() - by), bw = std::min(block, in.width() - bx);
      for (Index c = 0; c < 3; ++c) {
        // Mean taken relative to the first pixel so a constant block maps to
        // itself exactly and a second pass is the identity.
        const auto blk = in.channel(c).block(by, bx, bh, bw);
        const double first = blk(0, 0);
        out.channel(c).block(by, bx, bh, bw).setConstant(first + (blk - first).mean());
      }
    }
  return out;
}

}  // namespace

const char* to_string(CorruptionKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

CorruptionKind corruption_kind_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (name == kNames[i]) return static_cast<CorruptionKind>(i);
  throw UnknownKind("unknown corruption kind '" + name + "'");
}

bool is_noise(CorruptionKind kind) {
  return kind == CorruptionKind::GaussianNoise || kind == CorruptionKind::ShotNoise ||
         kind == CorruptionKind::ImpulseNoise;
}

bool is_blur(CorruptionKind kind) {
  return kind == CorruptionKind::DefocusBlur || kind == CorruptionKind::GlassBlur ||
         kind == CorruptionKind::MotionBlur || kind == CorruptionKind::ZoomBlur;
}

void CorruptionSpec::validate() const {
  if (static_cast<std::size_t>(kind) >= kNames.size()) throw UnknownKind("corruption kind out of range");
  if (severity < 1 || severity > 5)
    throw SeverityOutOfRange("severity " + std::to_string(severity) + " outside [1, 5]");
}

ImageTensor apply_corruption(const ImageTensor& image, const CorruptionSpec& spec, const CorruptionParamTable& table) {
  spec.validate();
  if (!is_valid_image(image)) throw ConfigInvalid("input image must be finite and within [0, 1]");
  const auto& p = table.at(spec.kind, spec.severity);
  DeterministicRng rng(spec.seed);
  ImageTensor out;
  switch (spec.kind) {
    case CorruptionKind::GaussianNoise:
      out = gaussian_noise(image, p.at("sigma"), rng);
      break;
    case CorruptionKind::ShotNoise:
      out = shot_noise(image, p.at("lambda"), rng);
      break;
    case CorruptionKind::ImpulseNoise:
      out = impulse_noise(image, p.at("amount"), rng);
      break;
    case CorruptionKind::DefocusBlur: {
      const int r = static_cast<int>(p.at("radius"));
      require_kernel_fits(2 * r + 1, image, spec.kind);
      out = kernels::apply_taps(image, kernels::disk_taps(r, p.at("alias_sigma")));
      break;
    }
    case CorruptionKind::GlassBlur:
      out = glass_blur(image, p.at("sigma"), static_cast<int>(p.at("max_delta")),
                       static_cast<int>(p.at("iterations")), rng);
      break;
    case CorruptionKind::MotionBlur: {
      const double r = p.at("radius");
      require_kernel_fits(2 * static_cast<Index>(std::ceil(r)) + 1, image, spec.kind);
      const double angle = rng.uniform(-45.0, 45.0);
      out = kernels::apply_taps(image, kernels::motion_taps(r, p.at("sigma"), angle), true);
      break;
    }
    case CorruptionKind::ZoomBlur:
      out = zoom_blur(image, p.at("zoom_max"), p.at("zoom_step"));
      break;
    case CorruptionKind::Snow:
      out = snow(image, p, rng);
      break;
    case CorruptionKind::Frost: {
      const auto tex = frost_texture(image.height(), image.width(), rng);
      out = image;
      out.pixels() = p.at("image_weight") * image.pixels() + p.at("frost_weight") * tex.pixels();
      break;
    }
    case CorruptionKind::Fog:
      out = fog(image, p.at("scale"), p.at("decay"), rng);
      break;
    case CorruptionKind::Brightness:
      out = brightness(image, p.at("shift"));
      break;
    case CorruptionKind::Contrast:
      out = contrast(image, p.at("factor"));
      break;
    case CorruptionKind::Elastic:
      out = elastic(image, p.at("alpha"), p.at("sigma"), rng);
      break;
    case CorruptionKind::Pixelate:
      out = pixelate(image, static_cast<Index>(p.at("block")));
      break;
    case CorruptionKind::Jpeg:
      out = kernels::jpeg_decode(kernels::jpeg_encode(image, static_cast<int>(p.at("quality"))));
      break;
  }
  return clamp01(std::move(out));
}

std::vector<ImageTensor> severity_profile(const ImageTensor& image, CorruptionKind kind, std::uint64_t seed,
                                          const CorruptionParamTable& table) {
  std::vector<ImageTensor> out;
  for (int k = 1; k <= 5; ++k) out.push_back(apply_corruption(image, {kind, k, derive_seed(seed, k)}, table));
  return out;
}

}  // namespace segrobust
