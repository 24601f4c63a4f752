#include "setswav/model/encoder.hpp"

#include "setswav/core/errors.hpp"

namespace setswav::model {

void ConvEncoder::init(const EncoderConfig& c, Rng& rng) {
    if (c.width < 1) throw SpecInvalid("encoder width must be >= 1");
    if (c.crop_size < 16) throw SpecInvalid("crop size must be >= 16 for four stride-2 blocks");
    cfg = c;
    int ch_in = 3;
    for (int b = 0; b < 4; ++b) {
        const int ch_out = cfg.width << b;
        conv[b].init("encoder.block" + std::to_string(b), ch_in, ch_out, 2, rng);
        ch_in = ch_out;
    }
}

std::vector<float> ConvEncoder::forward(const std::vector<float>& images, int n, bool train) {
    const int cs = cfg.crop_size;
    if (images.size() != static_cast<size_t>(n) * 3 * cs * cs)
        throw DimensionMismatch("encoder input size mismatch");
    std::vector<float> x(images.size());
    for (size_t i = 0; i < images.size(); ++i) x[i] = (images[i] - 0.5f) * 2.0f;

    int h = cs;
    for (int b = 0; b < 4; ++b) {
        x = conv[b].forward(x, n, h, h, train);
        x = relu[b].forward(x, train);
        h = Conv3x3::out_dim(h, 2);
    }
    return gap.forward(x, n, cfg.width * 8, h * h);
}

void ConvEncoder::backward(const std::vector<float>& dfeat) {
    std::vector<float> d = gap.backward(dfeat);
    for (int b = 3; b >= 0; --b) {
        d = relu[b].backward(d);
        d = conv[b].backward(d);
    }
    // Gradient with respect to input pixels is discarded.
}

std::vector<ParamTensor*> ConvEncoder::params() {
    std::vector<ParamTensor*> out;
    for (int b = 0; b < 4; ++b) {
        out.push_back(&conv[b].weight);
        out.push_back(&conv[b].bias);
    }
    return out;
}

void ConvEncoder::zero_grad() {
    for (ParamTensor* p : params()) p->zero_grad();
}

void ProjectionHead::init(int feat_dim, int hidden_dim, int out_dim, Rng& rng) {
    if (hidden_dim < 1 || out_dim < 1) throw SpecInvalid("projection head dims must be >= 1");
    hidden = hidden_dim;
    out = out_dim;
    fc1.init("projection.fc1", feat_dim, hidden, rng);
    fc2.init("projection.fc2", hidden, out, rng);
}

std::vector<float> ProjectionHead::forward(const std::vector<float>& feats, int n, bool train) {
    std::vector<float> h = fc1.forward(feats, n, train);
    h = relu.forward(h, train);
    h = fc2.forward(h, n, train);
    return l2.forward(h, n, out);
}

std::vector<float> ProjectionHead::backward(const std::vector<float>& dz) {
    std::vector<float> d = l2.backward(dz);
    d = fc2.backward(d);
    d = relu.backward(d);
    return fc1.backward(d);
}

std::vector<ParamTensor*> ProjectionHead::params() {
    return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
}

void ProjectionHead::zero_grad() {
    for (ParamTensor* p : params()) p->zero_grad();
}

void ClassifierHead::init(int in_dim, int n_verbs, int n_nouns, Rng& rng) {
    if (n_verbs < 2 || n_nouns < 2) throw SpecInvalid("classifier needs >= 2 classes per space");
    verb.init("head.verb", in_dim, n_verbs, rng);
    noun.init("head.noun", in_dim, n_nouns, rng);
}

std::pair<std::vector<float>, std::vector<float>> ClassifierHead::forward(
    const std::vector<float>& feats, int n, bool train) {
    return {verb.forward(feats, n, train), noun.forward(feats, n, train)};
}

std::vector<float> ClassifierHead::backward(const std::vector<float>& dverb,
                                            const std::vector<float>& dnoun) {
    std::vector<float> d = verb.backward(dverb);
    std::vector<float> d2 = noun.backward(dnoun);
    for (size_t i = 0; i < d.size(); ++i) d[i] += d2[i];
    return d;
}

std::vector<ParamTensor*> ClassifierHead::params() {
    return {&verb.weight, &verb.bias, &noun.weight, &noun.bias};
}

void ClassifierHead::zero_grad() {
    for (ParamTensor* p : params()) p->zero_grad();
}

}  // namespace setswav::model
