#pragma once

#include <string>
#include <vector>

#include "setswav/data/dataset.hpp"
#include "setswav/model/encoder.hpp"
#include "setswav/region/region.hpp"

namespace setswav::finetune {

// Empirical class frequencies of one label space. Zero-count classes are
// bumped to a count of one before normalizing so log(pi) stays finite;
// every entry is therefore strictly positive and the vector sums to 1.
struct ClassPrior {
    std::string space;  // "verb" | "noun"
    std::vector<double> pi;

    static ClassPrior from_counts(const std::string& space, const std::vector<int>& counts);
    static ClassPrior uniform(const std::string& space, int n_classes);
};

// Counts labels of one space over the train split.
ClassPrior prior_from_labels(const std::string& space, const std::vector<data::VideoLabel>& labels,
                             int n_classes);

// Max-subtracted cross entropy on raw logits. The grad variant also writes
// d loss / d logits (softmax minus one-hot).
double ce_loss(const std::vector<double>& logits, int label);
double ce_grad(const std::vector<double>& logits, int label, std::vector<double>& dlogits);

// Cross entropy after shifting each logit by tau_la * log pi_k. A uniform
// prior shifts all classes equally, so the loss equals ce_loss exactly.
// The shift is constant in the logits, so the gradient has the same form
// as plain cross entropy, just with softmax taken over shifted logits.
double logit_adjusted_ce(const std::vector<double>& logits, int label, const ClassPrior& prior,
                         double tau_la);
double logit_adjusted_ce_grad(const std::vector<double>& logits, int label,
                              const ClassPrior& prior, double tau_la,
                              std::vector<double>& dlogits);

// Per-video classifier outputs for both label spaces. The interchange unit
// between fine-tuning and fusion; files are line-delimited so externally
// produced logits can join the fusion stage.
struct LogitRecord {
    std::string video_id;
    std::string model_tag;
    std::vector<double> verb_logits;
    std::vector<double> noun_logits;
};

std::string format_logit_records(const std::vector<LogitRecord>& records);
std::vector<LogitRecord> parse_logit_records(const std::string& text);
void write_logit_records(const std::string& path, const std::vector<LogitRecord>& records);
std::vector<LogitRecord> load_logit_records(const std::string& path);
// Every record must match the header's label space sizes.
void check_logit_records(const std::vector<LogitRecord>& records, const data::DatasetHeader& h);

struct FinetuneConfig {
    std::string init = "random";  // "random" | "external:PATH" (pre-train checkpoint)
    bool lt_loss = true;          // logit-adjusted loss on both label spaces
    double tau_la = 1.0;
    bool freeze_encoder = false;  // train classifier heads only
    bool head_on_projection = false;  // attach heads to projection output, not encoder features
    int epochs = 30;
    double base_lr = 0.02;  // at reference batch 64; scaled linearly by batch_videos / 64
    double momentum = 0.9;
    double weight_decay = 1e-6;
    std::vector<int> lr_boundaries = {20};  // epochs after which lr multiplies by lr_factor
    double lr_factor = 0.1;
    int batch_videos = 16;
    int n_regions = 4;  // regions per video per step (train) and at evaluation
    // Encoder geometry for random init; external init reads these from the
    // checkpoint and overrides.
    int width = 32;
    int crop_size = 112;
    int proj_hidden = 256;
    int proj_dim = 128;
    int frames_per_clip = 8;
    double conf_threshold = 0.01;
    int max_regions_per_frame = 3;
    double jitter_lo = 1.0, jitter_hi = 1.25;
    uint64_t seed = 1;
    std::string model_tag = "oic";

    void validate() const;
    std::string to_json() const;
};

struct FinetuneModel {
    model::EncoderConfig enc_cfg;
    model::ConvEncoder encoder;
    model::ProjectionHead projection;  // in the head path only when head_on_projection
    model::ClassifierHead head;
    bool head_on_projection = false;
    bool freeze_encoder = false;

    int head_in_dim() const;
    void init(const FinetuneConfig& cfg, int n_verbs, int n_nouns, Rng& rng);
    // Parameters the optimizer updates (respects freeze_encoder).
    std::vector<model::ParamTensor*> trainable_params();
    // Everything that goes into the checkpoint.
    std::vector<model::ParamTensor*> all_params();
    void zero_grad();
};

// Classify each crop independently, then mean-pool the per-region logits
// into one video-level record. Invariant to the order of the crops.
LogitRecord video_logits(FinetuneModel& model, const std::vector<RegionCrop>& crops,
                         const std::string& video_id, const std::string& model_tag);

struct FinetuneEpoch {
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double wall_time = 0.0;
};

struct FinetuneResult {
    std::vector<FinetuneEpoch> log;
    double final_loss = 0.0;
    double train_verb_accuracy = 0.0;
    double train_noun_accuracy = 0.0;
    std::vector<LogitRecord> train_records;  // test-mode logits for the train split
    std::vector<LogitRecord> val_records;
    std::string checkpoint_path;
};

// End-to-end fine-tuning: load or init the encoder, train both heads with
// summed verb+noun loss, emit test-mode logit records for every labeled
// video and a checkpoint. Throws DivergenceDetected on non-finite loss.
FinetuneResult finetune(const RegionDataset& dataset, const std::vector<data::VideoLabel>& labels,
                        const data::DatasetHeader& header, const FinetuneConfig& config,
                        const std::string& checkpoint_path, const std::string& log_path = "");

}  // namespace setswav::finetune
