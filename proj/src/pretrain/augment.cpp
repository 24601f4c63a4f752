#include "setswav/pretrain/augment.hpp"

#include <algorithm>
#include <cmath>

#include "setswav/core/errors.hpp"
#include "setswav/kernels/kernels.hpp"

namespace setswav::pretrain {

AugmentRecipe AugmentRecipe::by_name(const std::string& name) {
    if (name == "standard") return standard();
    if (name == "identity") return identity();
    throw ConfigError("unknown augmentation recipe: " + name);
}

Image random_resized_crop(const Image& img, double scale_lo, double scale_hi, double aspect_lo,
                          double aspect_hi, Rng& rng) {
    const double area = static_cast<double>(img.h) * img.w;
    int cw = img.w, ch = img.h, x0 = 0, y0 = 0;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(scale_lo, scale_hi);
        const double aspect = std::exp(rng.uniform(std::log(aspect_lo), std::log(aspect_hi)));
        const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        if (w < 1 || h < 1 || w > img.w || h > img.h) continue;
        cw = w;
        ch = h;
        x0 = rng.uniform_int(0, img.w - w);
        y0 = rng.uniform_int(0, img.h - h);
        break;
    }
    Image sub(ch, cw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) sub.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    Image out(img.h, img.w);
    kernels::resize_bilinear(sub.data.data(), 3, ch, cw, out.data.data(), img.h, img.w);
    return out;
}

void hflip(Image& img) {
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w / 2; ++x)
                std::swap(img.at(c, y, x), img.at(c, y, img.w - 1 - x));
}

namespace {

void clamp01(Image& img) {
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

float luma(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

}  // namespace

void adjust_brightness(Image& img, double factor) {
    for (float& v : img.data) v = static_cast<float>(v * factor);
    clamp01(img);
}

void adjust_contrast(Image& img, double factor) {
    // Blend toward the image's mean gray level.
    double mean = 0.0;
    const int hw = img.h * img.w;
    for (int i = 0; i < hw; ++i)
        mean += luma(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
    mean /= hw;
    for (float& v : img.data)
        v = static_cast<float>(mean + (v - mean) * factor);
    clamp01(img);
}

void adjust_saturation(Image& img, double factor) {
    const int hw = img.h * img.w;
    for (int i = 0; i < hw; ++i) {
        const float g = luma(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
        for (int c = 0; c < 3; ++c) {
            float& v = img.data[c * hw + i];
            v = static_cast<float>(g + (v - g) * factor);
        }
    }
    clamp01(img);
}

void adjust_hue(Image& img, double delta) {
    const int hw = img.h * img.w;
    for (int i = 0; i < hw; ++i) {
        float h, s, v;
        rgb_to_hsv(img.data[i], img.data[hw + i], img.data[2 * hw + i], h, s, v);
        h += static_cast<float>(delta);
        h -= std::floor(h);
        hsv_to_rgb(h, s, v, img.data[i], img.data[hw + i], img.data[2 * hw + i]);
    }
    clamp01(img);
}

void to_grayscale(Image& img) {
    const int hw = img.h * img.w;
    for (int i = 0; i < hw; ++i) {
        const float g = luma(img.data[i], img.data[hw + i], img.data[2 * hw + i]);
        img.data[i] = img.data[hw + i] = img.data[2 * hw + i] = g;
    }
}

Image gaussian_blur(const Image& img, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(w);
        sum += w;
    }
    for (float& w : kernel) w = static_cast<float>(w / sum);

    Image tmp(img.h, img.w), out(img.h, img.w);
    // Horizontal then vertical pass, edge clamp.
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.h; ++y) {
            for (int x = 0; x < img.w; ++x) {
                float acc = 0.0f;
                for (int k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * img.at(c, y, std::clamp(x + k, 0, img.w - 1));
                tmp.at(c, y, x) = acc;
            }
        }
        for (int y = 0; y < img.h; ++y) {
            for (int x = 0; x < img.w; ++x) {
                float acc = 0.0f;
                for (int k = -radius; k <= radius; ++k)
                    acc += kernel[k + radius] * tmp.at(c, std::clamp(y + k, 0, img.h - 1), x);
                out.at(c, y, x) = acc;
            }
        }
    }
    return out;
}

Image augment(const Image& crop, const AugmentRecipe& r, Rng& rng) {
    if (crop.h < 1 || crop.w < 1) throw DataError("cannot augment an empty crop");
    if (!r.enabled) return crop;
    Image img = random_resized_crop(crop, r.crop_scale_lo, r.crop_scale_hi, r.aspect_lo, r.aspect_hi, rng);
    if (rng.uniform() < r.flip_prob) hflip(img);
    if (rng.uniform() < r.jitter_prob) {
        adjust_brightness(img, rng.uniform(1.0 - r.brightness, 1.0 + r.brightness));
        adjust_contrast(img, rng.uniform(1.0 - r.contrast, 1.0 + r.contrast));
        adjust_saturation(img, rng.uniform(1.0 - r.saturation, 1.0 + r.saturation));
        adjust_hue(img, rng.uniform(-r.hue, r.hue));
    }
    if (rng.uniform() < r.grayscale_prob) to_grayscale(img);
    if (rng.uniform() < r.blur_prob) img = gaussian_blur(img, rng.uniform(r.blur_sigma_lo, r.blur_sigma_hi));
    return img;
}

}  // namespace setswav::pretrain
