#include "setswav/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "setswav/core/errors.hpp"
#include "setswav/kernels/kernels.hpp"

namespace setswav {

void quantize_u8(Image& img) {
    for (float& v : img.data) {
        float c = std::clamp(v, 0.0f, 1.0f);
        int q = static_cast<int>(std::lround(c * 255.0f));
        v = static_cast<float>(q) / 255.0f;
    }
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_ppm: cannot open " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("write_ppm: short write to " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_ppm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw DataError("read_ppm: not a P6 file: " + path);
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255)
        throw DataError("read_ppm: unsupported header in " + path);
    in.get();  // single whitespace after maxval
    Image img(h, w);
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size()));
        if (!in) throw DataError("read_ppm: truncated file " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<float>(row[static_cast<size_t>(x) * 3 + c]) / 255.0f;
    }
    return img;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    Image dst(out_h, out_w);
    kernels::resize_bilinear(src.data.data(), 3, src.h, src.w,
                             dst.data.data(), out_h, out_w);
    return dst;
}

void rgb_to_hsv(float r, float g, float b, float& hh, float& ss, float& vv) {
    float mx = std::max({r, g, b});
    float mn = std::min({r, g, b});
    float d = mx - mn;
    vv = mx;
    ss = mx > 0.0f ? d / mx : 0.0f;
    if (d <= 0.0f) {
        hh = 0.0f;
        return;
    }
    float h6;
    if (mx == r)
        h6 = (g - b) / d + (g < b ? 6.0f : 0.0f);
    else if (mx == g)
        h6 = (b - r) / d + 2.0f;
    else
        h6 = (r - g) / d + 4.0f;
    hh = h6 / 6.0f;
}

void hsv_to_rgb(float hh, float ss, float vv, float& r, float& g, float& b) {
    hh = hh - std::floor(hh);
    float h6 = hh * 6.0f;
    int i = static_cast<int>(h6) % 6;
    float f = h6 - std::floor(h6);
    float p = vv * (1.0f - ss);
    float q = vv * (1.0f - ss * f);
    float t = vv * (1.0f - ss * (1.0f - f));
    switch (i) {
        case 0: r = vv; g = t; b = p; break;
        case 1: r = q; g = vv; b = p; break;
        case 2: r = p; g = vv; b = t; break;
        case 3: r = p; g = q; b = vv; break;
        case 4: r = t; g = p; b = vv; break;
        default: r = vv; g = p; b = q; break;
    }
}

}  // namespace setswav
