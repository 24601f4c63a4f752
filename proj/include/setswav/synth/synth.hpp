#pragma once

#include <memory>
#include <string>
#include <vector>

#include "setswav/core/image.hpp"
#include "setswav/core/rng.hpp"
#include "setswav/data/dataset.hpp"
#include "setswav/region/manifest.hpp"
#include "setswav/region/region.hpp"

namespace setswav::synth {

// Procedural dataset description. Cluster identity decides the noun label;
// the temporal transform family decides the verb label.
struct SynthSpec {
    int n_videos = 256;
    int n_clusters = 8;       // latent object clusters, at most 8 distinct templates
    int n_verbs = 8;          // transform families, at most 8
    int n_nouns = 8;
    double imbalance_ratio = 20.0;  // head:tail class count ratio
    int frames_per_video = 8;
    int regions_per_frame = 3;      // upper bound per frame (1 tracked blob + distractors)
    int patch_size = 64;
    double noise_sigma = 0.05;
    uint64_t seed = 1234;

    // Artifact plumbing beyond the core knobs.
    int n_participants = 8;
    int n_unseen_participants = 2;
    double val_fraction = 0.25;
    double distractor_prob = 0.5;
    double frame_scale = 2.5;  // frame side = patch_size * frame_scale

    int frame_size() const { return static_cast<int>(patch_size * frame_scale); }
    void validate() const;  // throws SpecInvalid
};

std::string spec_to_json(const SynthSpec& spec);
SynthSpec spec_from_json(const std::string& text);

// Per-video latent state: which template, which transform path.
struct VideoPlan {
    std::string video_id;
    int cluster = 0;
    int verb = 0;
    int noun = 0;
    int participant = 0;
    std::string split;
    double cx = 0.0, cy = 0.0;       // blob center at t=0 (integer-valued)
    double amp_rot = 0.0;            // radians over the clip
    double amp_scale = 0.0;          // log-scale over the clip
    double drift_x = 0.0, drift_y = 0.0;
};

struct GeneratedDataset {
    SynthSpec spec;
    std::vector<VideoPlan> plans;
    std::vector<DetectionRecord> manifest;
    std::vector<data::VideoLabel> labels;
    data::DatasetHeader header;
};

// Deterministic generation: same spec (same seed) yields byte-identical
// manifest/labels/header text and bit-identical frames.
GeneratedDataset generate(const SynthSpec& spec);

// Writes manifest.txt, labels.txt, header.json, and frames/<vid>/%04d.ppm
// under out_dir.
void write_dataset(const GeneratedDataset& ds, const std::string& out_dir, bool write_frames = true);

// The cluster's canonical appearance: the blob rendered at the identity
// transform into a patch_size x patch_size image.
Image render_template(const SynthSpec& spec, int cluster);

// Renders one full frame (blob + distractors + noise).
Image render_frame(const SynthSpec& spec, const VideoPlan& plan, int frame_index);

// In-memory frame source; pixels are quantized to 8-bit so results match the
// on-disk PPM path bit for bit.
class SynthFrameProvider : public FrameProvider {
  public:
    explicit SynthFrameProvider(GeneratedDataset ds);
    Image frame(const std::string& video_id, int frame_index) const override;
    int frame_count(const std::string& video_id) const override;

  private:
    GeneratedDataset ds_;
    std::map<std::string, const VideoPlan*> by_id_;
};

// Synthetic classifier output with controllable per-space quality: logits are
// unit-normal noise plus `margin` on the true class, so accuracy rises with
// the margin. Used to build the deliberately lopsided "external model" files.
struct LogitQuality {
    double verb_margin = 3.0;
    double noun_margin = 0.5;
};

struct SynthLogit {
    std::string video_id;
    std::vector<double> verb;
    std::vector<double> noun;
};

std::vector<SynthLogit> synthesize_logits(const std::vector<data::VideoLabel>& labels,
                                          const data::DatasetHeader& header,
                                          const LogitQuality& quality, uint64_t seed);

// Exponential class-count profile with head:tail ratio rho, rounded to
// integers summing to total by largest remainder; every class gets >= 1 when
// total >= n_classes.
std::vector<int> class_count_profile(int total, int n_classes, double rho);

}  // namespace setswav::synth
