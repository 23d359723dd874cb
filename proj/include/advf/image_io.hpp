#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advf/tensor.hpp"

namespace advf {

// 8-bit RGB image, row-major HWC.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pix;  // height*width*3

    Image() = default;
    Image(int h, int w);

    uint8_t& at(int y, int x, int c) { return pix[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    uint8_t at(int y, int x, int c) const { return pix[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    size_t size() const { return pix.size(); }

    bool operator==(const Image& o) const { return height == o.height && width == o.width && pix == o.pix; }
};

// Pixels as float tensor [H,W,3] in the 0..255 range.
Tensor image_to_tensor(const Image& img);
// Rounds and clamps to [0,255].
Image tensor_to_image(const Tensor& t);

// Lossless binary PPM (P6, maxval 255). save_image rejects lossy extensions
// (.jpg/.jpeg) and anything other than .ppm: attacked pixels must survive
// storage exactly.
void save_image(const Image& img, const std::string& path);
Image load_image(const std::string& path);

Image bilinear_resize(const Image& src, int out_h, int out_w);

// max_c |a - b| over all pixels; images must have identical dimensions.
int linf_distance(const Image& a, const Image& b);

}  // namespace advf
