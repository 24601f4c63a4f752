#pragma once

#include <functional>
#include <string>
#include <vector>

#include "setswav/model/encoder.hpp"
#include "setswav/pretrain/augment.hpp"
#include "setswav/pretrain/checkpoint.hpp"
#include "setswav/region/region.hpp"
#include "setswav/ssl/ssl.hpp"

namespace setswav::pretrain {

struct PretrainConfig {
    std::string objective = "swav_s";  // "swav" | "swav_s"
    int n_regions = 4;                 // N, regions per set (forced to 2 views for swav)
    int batch_sets = 8;                // S, sets per step
    int epochs = 10;
    double base_lr = 0.6;              // at reference batch 256; scaled by actual batch / 256
    double momentum = 0.9;
    double weight_decay = 1e-6;
    double tau = 0.1;
    double epsilon = 0.05;
    int sinkhorn_iters = 3;
    int n_prototypes = 64;             // K
    int proj_hidden = 256;
    int proj_dim = 128;                // d
    int width = 32;                    // encoder width (feature dim is 8 * width)
    int crop_size = 112;
    int frames_per_clip = 8;           // temporal segments sampled per video
    double conf_threshold = 0.01;
    int max_regions_per_frame = 3;
    double jitter_lo = 1.0, jitter_hi = 1.25;
    uint64_t seed = 1;
    std::string recipe = "standard";   // augmentation recipe id
    std::string init = "random";       // "random" | "external:PATH"
    bool freeze_prototypes = false;    // skip prototype updates for the first epoch
    int freeze_prototype_epochs = 1;

    void validate() const;
    std::string to_json() const;
};

struct PretrainModel {
    model::EncoderConfig enc_cfg;
    model::ConvEncoder encoder;
    model::ProjectionHead projection;
    model::ParamTensor prototypes;  // [K, proj_dim], unit-norm rows

    void init_random(const PretrainConfig& cfg, Rng& rng);
    void load_external(const PretrainConfig& cfg, const std::string& path, Rng& rng);
    std::vector<model::ParamTensor*> params();
    ssl::PrototypeBank bank() const;  // double-precision copy for the loss
    void renormalize_prototypes();
};

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double wall_time = 0.0;  // seconds spent in the epoch
};

struct PretrainResult {
    std::vector<EpochMetrics> log;
    double first_epoch_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> probe_losses;  // frozen-batch loss per epoch
    bool probe_warning = false;        // smoothed probe loss failed to decrease
    std::string checkpoint_path;
};

// Runs the full loop and writes the checkpoint (and, when log_path is not
// empty, one JSON metrics line per epoch). Throws DivergenceDetected when
// the loss leaves the finite range.
PretrainResult train(const RegionDataset& dataset, const PretrainConfig& config,
                     const std::string& checkpoint_path, const std::string& log_path = "");

// Assembles one step's batch: materialized, augmented, encoded, normalized
// embeddings for the given videos. Exposed for tests.
ssl::SetBatch build_batch(const RegionDataset& dataset, const std::vector<std::string>& video_ids,
                          const PretrainConfig& config, PretrainModel& model, int epoch, int step,
                          bool train_mode);

}  // namespace setswav::pretrain
