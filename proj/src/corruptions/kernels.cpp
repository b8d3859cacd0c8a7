#include "segrobust/corruptions/kernels.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "segrobust/core/image_io.hpp"

namespace segrobust::kernels {

namespace {

Index max_offset(const std::vector<Tap>& taps) {
  Index p = 0;
  for (const auto& t : taps) p = std::max({p, std::abs(t.dy), std::abs(t.dx)});
  return p;
}

Plane<double> pad(const Plane<double>& in, Index p, bool clamp_edges) {
  const Index h = in.rows(), w = in.cols();
  Plane<double> out(h + 2 * p, w + 2 * p);
  for (Index y = 0; y < out.rows(); ++y) {
    const Index sy = clamp_edges ? std::clamp<Index>(y - p, 0, h - 1) : reflect_index(y - p, h);
    for (Index x = 0; x < out.cols(); ++x) {
      const Index sx = clamp_edges ? std::clamp<Index>(x - p, 0, w - 1) : reflect_index(x - p, w);
      out(y, x) = in(sy, sx);
    }
  }
  return out;
}

template <typename PlaneOp>
ImageTensor per_channel(const ImageTensor& in, PlaneOp op) {
  ImageTensor out(in.height(), in.width());
  for (Index c = 0; c < 3; ++c) out.channel(c) = op(Plane<double>(in.channel(c)));
  return out;
}

std::vector<double> gaussian_weights(double sigma, int radius) {
  std::vector<double> w(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += w[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  for (auto& v : w) v /= sum;
  return w;
}

struct JpegError {
  jpeg_error_mgr mgr;
};

[[noreturn]] void jpeg_throw(j_common_ptr cinfo) {
  char buffer[JMSG_LENGTH_MAX];
  (*cinfo->err->format_message)(cinfo, buffer);
  throw IoError(std::string("jpeg: ") + buffer);
}

}  // namespace

Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Plane<double> apply_taps(const Plane<double>& in, const std::vector<Tap>& taps, bool clamp_edges) {
  const Index p = max_offset(taps);
  const Plane<double> padded = pad(in, p, clamp_edges);
  Plane<double> out = Plane<double>::Zero(in.rows(), in.cols());
  for (const auto& t : taps) out += t.weight * padded.block(p + t.dy, p + t.dx, in.rows(), in.cols());
  return out;
}

ImageTensor apply_taps(const ImageTensor& in, const std::vector<Tap>& taps, bool clamp_edges) {
  return per_channel(in, [&](const Plane<double>& c) { return apply_taps(c, taps, clamp_edges); });
}

int gaussian_radius(double sigma, double truncate) { return static_cast<int>(truncate * sigma + 0.5); }

Plane<double> gaussian_blur(const Plane<double>& in, double sigma, double truncate) {
  if (!(sigma > 0)) return in;
  const int r = gaussian_radius(sigma, truncate);
  const auto w = gaussian_weights(sigma, r);
  const Index h = in.rows(), wd = in.cols();
  Plane<double> rows = Plane<double>::Zero(h, wd);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < wd; ++x) {
      double acc = 0;
      for (int k = -r; k <= r; ++k) acc += w[k + r] * in(y, reflect_index(x + k, wd));
      rows(y, x) = acc;
    }
  Plane<double> out = Plane<double>::Zero(h, wd);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < wd; ++x) {
      double acc = 0;
      for (int k = -r; k <= r; ++k) acc += w[k + r] * rows(reflect_index(y + k, h), x);
      out(y, x) = acc;
    }
  return out;
}

ImageTensor gaussian_blur(const ImageTensor& in, double sigma, double truncate) {
  return per_channel(in, [&](const Plane<double>& c) { return gaussian_blur(c, sigma, truncate); });
}

std::vector<Tap> disk_taps(int radius, double alias_sigma) {
  const int aa = radius <= 8 ? 1 : 2;
  const int ext = radius + aa;
  const Index n = 2 * ext + 1;
  Plane<double> disk = Plane<double>::Zero(n, n);
  for (int y = -ext; y <= ext; ++y)
    for (int x = -ext; x <= ext; ++x)
      if (x * x + y * y <= radius * radius) disk(y + ext, x + ext) = 1.0;
  disk /= disk.sum();
  // Soften with a small zero-padded gaussian so the kernel mass stays 1.
  const auto g = gaussian_weights(alias_sigma > 0 ? alias_sigma : 1e-3, aa);
  Plane<double> soft = Plane<double>::Zero(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int dy = -aa; dy <= aa; ++dy)
        for (int dx = -aa; dx <= aa; ++dx) {
          const int sy = y + dy, sx = x + dx;
          if (sy >= 0 && sy < n && sx >= 0 && sx < n) soft(y, x) += g[dy + aa] * g[dx + aa] * disk(sy, sx);
        }
  soft /= soft.sum();
  std::vector<Tap> taps;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (soft(y, x) > 0) taps.push_back({y - ext, x - ext, soft(y, x)});
  return taps;
}

std::vector<Tap> motion_taps(double radius, double sigma, double angle_deg) {
  const int length = 2 * static_cast<int>(std::ceil(radius)) + 1;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  std::vector<Tap> taps;
  double sum = 0;
  for (int i = 0; i < length; ++i) {
    const double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
    const Index dy = static_cast<Index>(std::lround(i * std::sin(theta)));
    const Index dx = static_cast<Index>(std::lround(i * std::cos(theta)));
    taps.push_back({dy, dx, w});
    sum += w;
  }
  for (auto& t : taps) t.weight /= sum;
  return taps;
}

double sample_bilinear(const Plane<double>& in, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const double ty = y - fy, tx = x - fx;
  const Index y0 = static_cast<Index>(fy), x0 = static_cast<Index>(fx);
  const Index h = in.rows(), w = in.cols();
  const Index ya = reflect_index(y0, h), yb = reflect_index(y0 + 1, h);
  const Index xa = reflect_index(x0, w), xb = reflect_index(x0 + 1, w);
  return (1 - ty) * ((1 - tx) * in(ya, xa) + tx * in(ya, xb)) + ty * ((1 - tx) * in(yb, xa) + tx * in(yb, xb));
}

Plane<double> zoom_center(const Plane<double>& in, double factor) {
  const double cy = (in.rows() - 1) / 2.0, cx = (in.cols() - 1) / 2.0;
  Plane<double> out(in.rows(), in.cols());
  for (Index y = 0; y < in.rows(); ++y)
    for (Index x = 0; x < in.cols(); ++x)
      out(y, x) = sample_bilinear(in, cy + (y - cy) / factor, cx + (x - cx) / factor);
  return out;
}

ImageTensor zoom_center(const ImageTensor& in, double factor) {
  return per_channel(in, [&](const Plane<double>& c) { return zoom_center(c, factor); });
}

Plane<double> plasma_fractal(Index size, double decay, DeterministicRng& rng) {
  Plane<double> m = Plane<double>::Zero(size, size);
  Index step = size;
  double wibble = 100.0;
  // Reference quirk kept: the jitter is wibble * U(-wibble, wibble).
  auto wibbled = [&](double sum) { return sum / 4.0 + wibble * rng.uniform(-wibble, wibble); };
  while (step >= 2) {
    const Index n = size / step, half = step / 2;
    auto ul = [&](Index i, Index j) { return m((i % n) * step, (j % n) * step); };
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        m(i * step + half, j * step + half) = wibbled(ul(i, j) + ul(i + 1, j) + ul(i, j + 1) + ul(i + 1, j + 1));
    auto dr = [&](Index i, Index j) { return m(((i + n) % n) * step + half, ((j + n) % n) * step + half); };
    Plane<double> top(n, n), left(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        top(i, j) = wibbled(dr(i, j) + dr(i - 1, j) + ul(i, j) + ul(i, j + 1));
      }
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) m(i * step, j * step + half) = top(i, j);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) left(i, j) = wibbled(dr(i, j) + dr(i, j - 1) + ul(i, j) + ul(i + 1, j));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) m(i * step + half, j * step) = left(i, j);
    step /= 2;
    wibble /= decay;
  }
  m -= m.minCoeff();
  const double mx = m.maxCoeff();
  if (mx > 0) m /= mx;
  return m;
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double v = std::max({r, g, b});
  const double c = v - std::min({r, g, b});
  const double s = v > 0 ? c / v : 0.0;
  double h = 0;
  if (c > 0) {
    if (v == r) h = std::fmod((g - b) / c + 6.0, 6.0);
    else if (v == g) h = (b - r) / c + 2.0;
    else h = (r - g) / c + 4.0;
    h /= 6.0;
  }
  return {h, s, v};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double h6 = h * 6.0;
  const double fl = std::floor(h6);
  const double f = h6 - fl;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (static_cast<int>(fl) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Plane<double> luma(const ImageTensor& image) {
  return 0.299 * image.channel(0) + 0.587 * image.channel(1) + 0.114 * image.channel(2);
}

std::vector<unsigned char> jpeg_encode(const ImageTensor& image, int quality) {
  const auto rgb = to_rgb8(image);
  jpeg_compress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_throw;
  jpeg_create_compress(&cinfo);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  std::vector<unsigned char> out;
  try {
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(image.width());
    cinfo.image_height = static_cast<JDIMENSION>(image.height());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
      JSAMPROW row = const_cast<JSAMPROW>(rgb.data() + cinfo.next_scanline * image.width() * 3);
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    out.assign(buffer, buffer + size);
  } catch (...) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw;
  }
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return out;
}

ImageTensor jpeg_decode(const std::vector<unsigned char>& bytes) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_throw;
  jpeg_create_decompress(&cinfo);
  std::vector<unsigned char> rgb;
  Index h = 0, w = 0;
  try {
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = cinfo.output_width;
    h = cinfo.output_height;
    rgb.resize(static_cast<std::size_t>(w * h * 3));
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = rgb.data() + cinfo.output_scanline * w * 3;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
  } catch (...) {
    jpeg_destroy_decompress(&cinfo);
    throw;
  }
  jpeg_destroy_decompress(&cinfo);
  return from_rgb8(rgb.data(), h, w);
}

double psnr(const ImageTensor& reference, const ImageTensor& test) {
  if (!reference.same_shape(test)) throw DimensionMismatch("psnr: image shapes differ");
  const double mse = (reference.pixels() - test.pixels()).square().mean();
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace segrobust::kernels
