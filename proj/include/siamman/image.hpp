#pragma once

#include <array>
#include <string>
#include <vector>

#include "siamman/anchors.hpp"
#include "siamman/tensor.hpp"

namespace siamman {

// Images are [3,H,W] tensors with values in [0,1]. On disk a frame is a
// binary PPM (P6, maxval 255): an ASCII dimensions header followed by raw
// 8-bit RGB pixels.
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

// lexicographically sorted *.ppm files in a directory
std::vector<std::string> list_sequence_frames(const std::string& dir);

std::array<double, 3> channel_means(const Tensor& image);

// Square crop of side `side` centered at (cx, cy), bilinearly resampled to
// out_size x out_size; samples outside the frame take the pad color.
Tensor crop_resize(const Tensor& image, double cx, double cy, double side, int out_size,
                   const std::array<double, 3>& pad);

// context-padded exemplar side: sqrt((w+p)(h+p)) with p = (w+h)/2
double context_side(const Box& b);

}  // namespace siamman
