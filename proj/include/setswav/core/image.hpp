#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace setswav {

// Planar CHW float image, values in [0, 1], 3 channels (RGB).
struct Image {
    int h = 0;
    int w = 0;
    std::vector<float> data;  // size 3*h*w, channel-major

    Image() = default;
    Image(int height, int width, float fill = 0.0f)
        : h(height), w(width), data(static_cast<size_t>(3) * height * width, fill) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    bool empty() const { return data.empty(); }
};

// Quantize to 8 bits per channel and back; the file-based and in-memory frame
// providers must agree bit-for-bit, so every generated frame passes through
// this before use.
void quantize_u8(Image& img);

// Binary PPM (P6, maxval 255).
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// Bilinear resize with half-pixel centers and edge clamping. A same-size
// resize is an exact copy.
Image resize_bilinear(const Image& src, int out_h, int out_w);

// RGB <-> HSV helpers used by color jitter (h in [0,1), s, v in [0,1]).
void rgb_to_hsv(float r, float g, float b, float& hh, float& ss, float& vv);
void hsv_to_rgb(float hh, float ss, float vv, float& r, float& g, float& b);

}  // namespace setswav
