#pragma once

#include "setswav/core/image.hpp"
#include "setswav/core/rng.hpp"

namespace setswav::pretrain {

// Photometric/geometric view augmentation. Ops apply in a fixed order:
// random resized crop, horizontal flip, color jitter, grayscale, blur.
// Output always has the input's dimensions.
struct AugmentRecipe {
    bool enabled = true;  // identity recipe when false
    double crop_scale_lo = 0.5, crop_scale_hi = 1.0;
    double aspect_lo = 0.75, aspect_hi = 4.0 / 3.0;
    double flip_prob = 0.5;
    double jitter_prob = 0.8;
    double brightness = 0.4, contrast = 0.4, saturation = 0.4, hue = 0.1;
    double grayscale_prob = 0.2;
    double blur_prob = 0.5;
    double blur_sigma_lo = 0.1, blur_sigma_hi = 2.0;

    static AugmentRecipe standard() { return {}; }
    static AugmentRecipe identity() {
        AugmentRecipe r;
        r.enabled = false;
        return r;
    }
    static AugmentRecipe by_name(const std::string& name);  // "standard" | "identity"
};

Image augment(const Image& crop, const AugmentRecipe& recipe, Rng& rng);

// Individual ops, exposed for direct testing.
Image random_resized_crop(const Image& img, double scale_lo, double scale_hi, double aspect_lo,
                          double aspect_hi, Rng& rng);
void hflip(Image& img);
void adjust_brightness(Image& img, double factor);
void adjust_contrast(Image& img, double factor);
void adjust_saturation(Image& img, double factor);
void adjust_hue(Image& img, double delta);
void to_grayscale(Image& img);
Image gaussian_blur(const Image& img, double sigma);

}  // namespace setswav::pretrain
