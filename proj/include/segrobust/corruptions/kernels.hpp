#ifndef SEGROBUST_CORRUPTIONS_KERNELS_HPP
#define SEGROBUST_CORRUPTIONS_KERNELS_HPP

// Image-processing building blocks behind the corruption kernels. Unless
// stated otherwise, borders use half-sample symmetric reflection
// (d c b a | a b c d | d c b a).

#include <array>
#include <cstddef>
#include <vector>

#include "segrobust/core/rng.hpp"
#include "segrobust/core/types.hpp"

namespace segrobust::kernels {

Index reflect_index(Index i, Index n);

struct Tap {
  Index dy;
  Index dx;
  double weight;
};

// out(y, x) = sum_k w_k * in(y + dy_k, x + dx_k).
Plane<double> apply_taps(const Plane<double>& in, const std::vector<Tap>& taps, bool clamp_edges = false);
ImageTensor apply_taps(const ImageTensor& in, const std::vector<Tap>& taps, bool clamp_edges = false);

// Separable gaussian truncated at `truncate` sigmas (radius = int(truncate * sigma + 0.5)).
int gaussian_radius(double sigma, double truncate = 4.0);
Plane<double> gaussian_blur(const Plane<double>& in, double sigma, double truncate = 4.0);
ImageTensor gaussian_blur(const ImageTensor& in, double sigma, double truncate = 4.0);

// Normalized disk of the given radius, softened by a small gaussian
// (3x3 up to radius 8, else 5x5) of sigma `alias_sigma`.
std::vector<Tap> disk_taps(int radius, double alias_sigma);

// One-sided line of 2 * radius + 1 taps with gaussian falloff `sigma`
// along `angle_deg`, offsets rounded to the pixel grid.
std::vector<Tap> motion_taps(double radius, double sigma, double angle_deg);

double sample_bilinear(const Plane<double>& in, double y, double x);

// Magnify about the image center by `factor` >= 1, bilinear.
Plane<double> zoom_center(const Plane<double>& in, double factor);
ImageTensor zoom_center(const ImageTensor& in, double factor);

// Diamond-square fractal on a toroidal size x size grid (size a power of
// two), normalized to [0, 1].
Plane<double> plasma_fractal(Index size, double decay, DeterministicRng& rng);

std::array<double, 3> rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

// 0.299 R + 0.587 G + 0.114 B.
Plane<double> luma(const ImageTensor& image);

// Baseline JPEG with libjpeg defaults (4:2:0) at `quality`.
std::vector<unsigned char> jpeg_encode(const ImageTensor& image, int quality);
ImageTensor jpeg_decode(const std::vector<unsigned char>& bytes);

double psnr(const ImageTensor& reference, const ImageTensor& test);

}  // namespace segrobust::kernels

#endif  // SEGROBUST_CORRUPTIONS_KERNELS_HPP
