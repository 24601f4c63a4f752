#pragma once

#include <string>
#include <vector>

#include "setswav/core/rng.hpp"

namespace setswav::model {

// Named parameter with matching gradient and momentum buffers. All model
// state is float32; checkpoints store these arrays verbatim.
struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> w;
    std::vector<float> g;
    std::vector<float> m;

    void init(std::string n, std::vector<int> s);
    size_t size() const { return w.size(); }
    void zero_grad();
};

// 3x3 convolution, padding 1, configurable stride, with bias. Forward caches
// the input so backward can rebuild the im2col matrix instead of storing it.
struct Conv3x3 {
    int in_c = 0;
    int out_c = 0;
    int stride = 1;
    ParamTensor weight;  // [out_c, in_c*9]
    ParamTensor bias;    // [out_c]

    void init(const std::string& name, int in_channels, int out_channels, int stride_, Rng& rng);

    // x: batch of n images, each in_c * h * w. Returns out_c * oh * ow each.
    std::vector<float> forward(const std::vector<float>& x, int n, int h, int w, bool train);
    std::vector<float> backward(const std::vector<float>& dout);
    static int out_dim(int in, int stride) { return (in + 2 - 3) / stride + 1; }

    std::vector<float> cached_x;
    int cached_n = 0, cached_h = 0, cached_w = 0;
};

struct Linear {
    int in_f = 0;
    int out_f = 0;
    ParamTensor weight;  // [out_f, in_f]
    ParamTensor bias;    // [out_f]

    void init(const std::string& name, int in_features, int out_features, Rng& rng);
    std::vector<float> forward(const std::vector<float>& x, int n, bool train);
    std::vector<float> backward(const std::vector<float>& dout);

    std::vector<float> cached_x;
    int cached_n = 0;
};

struct ReLU {
    std::vector<float> forward(const std::vector<float>& x, bool train);
    std::vector<float> backward(const std::vector<float>& dout) const;
    std::vector<float> mask;
};

// Global average pool over the spatial plane of each channel.
struct GlobalAvgPool {
    std::vector<float> forward(const std::vector<float>& x, int n, int c, int hw);
    std::vector<float> backward(const std::vector<float>& dout) const;
    int cached_n = 0, cached_c = 0, cached_hw = 0;
};

// Row-wise L2 normalization with full backward through the norm.
struct L2Normalize {
    std::vector<float> forward(const std::vector<float>& x, int n, int d);
    std::vector<float> backward(const std::vector<float>& dout) const;
    std::vector<float> cached_y;
    std::vector<float> cached_norm;
    int cached_n = 0, cached_d = 0;
};

// SGD with momentum and decoupled-from-schedule weight decay applied as
// grad += wd * w before the momentum update.
struct SgdConfig {
    double momentum = 0.9;
    double weight_decay = 1e-6;
};

void sgd_step(std::vector<ParamTensor*>& params, double lr, const SgdConfig& cfg);

// Cosine decay from base_lr to 0 over total steps (no warmup).
double cosine_lr(double base_lr, long step, long total_steps);

// Piecewise-constant decay: base_lr multiplied by factor^(number of
// boundaries at or below epoch).
double step_lr(double base_lr, int epoch, const std::vector<int>& boundaries, double factor);

}  // namespace setswav::model
