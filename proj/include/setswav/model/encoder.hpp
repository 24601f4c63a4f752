#pragma once

#include <string>
#include <vector>

#include "setswav/core/rng.hpp"
#include "setswav/model/layers.hpp"

namespace setswav::model {

// Four stride-2 conv blocks with channel widths {w, 2w, 4w, 8w}, global
// average pool. Feature dimension is 8w (256 at the default width 32).
struct EncoderConfig {
    int width = 32;
    int crop_size = 112;

    int feat_dim() const { return width * 8; }
};

struct ConvEncoder {
    EncoderConfig cfg;
    Conv3x3 conv[4];
    ReLU relu[4];
    GlobalAvgPool gap;

    void init(const EncoderConfig& c, Rng& rng);

    // images: n crops, each 3 * crop * crop in [0, 1]; output n x feat_dim.
    // Pixel centering (x - 0.5) * 2 happens here.
    std::vector<float> forward(const std::vector<float>& images, int n, bool train);
    void backward(const std::vector<float>& dfeat);

    std::vector<ParamTensor*> params();
    void zero_grad();
};

// Two-layer nonlinear map from encoder features to the unit sphere.
struct ProjectionHead {
    int hidden = 256;
    int out = 128;
    Linear fc1, fc2;
    ReLU relu;
    L2Normalize l2;

    void init(int feat_dim, int hidden_dim, int out_dim, Rng& rng);
    std::vector<float> forward(const std::vector<float>& feats, int n, bool train);
    std::vector<float> backward(const std::vector<float>& dz);
    std::vector<ParamTensor*> params();
    void zero_grad();
};

// Disjoint linear classifiers for the two label spaces. Gradients never
// cross between them.
struct ClassifierHead {
    Linear verb, noun;

    void init(int in_dim, int n_verbs, int n_nouns, Rng& rng);
    // Returns verb logits (n x n_verbs) and noun logits (n x n_nouns).
    std::pair<std::vector<float>, std::vector<float>> forward(const std::vector<float>& feats,
                                                              int n, bool train);
    std::vector<float> backward(const std::vector<float>& dverb, const std::vector<float>& dnoun);
    std::vector<ParamTensor*> params();
    void zero_grad();
};

}  // namespace setswav::model
