#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "setswav/core/image.hpp"
#include "setswav/core/rng.hpp"
#include "setswav/region/manifest.hpp"

namespace setswav {

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
};

// One cropped region, resized to crop_size x crop_size. Confidence rides
// along from the detection so that test-time top-k selection can see it.
struct RegionCrop {
    std::string video_id;
    int frame_index = 0;
    Box source_box;
    double confidence = 0.0;
    double jitter_factor = 1.0;
    Image crop;
};

// All regions of one video plus its video-level labels; the unit sample for
// both pre-training and fine-tuning. Labels are absent in the SSL stage.
struct RegionSet {
    std::string video_id;
    std::vector<RegionCrop> regions;
    std::optional<int> verb_label;
    std::optional<int> noun_label;
};

// Frame access abstraction: directory-of-PPMs or the synthetic in-memory
// provider (see synth module).
class FrameProvider {
public:
    virtual ~FrameProvider() = default;
    virtual Image frame(const std::string& video_id, int frame_index) const = 0;
    virtual int frame_count(const std::string& video_id) const = 0;
};

// Reads frames/<video_id>/NNNN.ppm under a dataset directory.
class DirectoryFrameProvider : public FrameProvider {
public:
    explicit DirectoryFrameProvider(std::string root) : root_(std::move(root)) {}
    Image frame(const std::string& video_id, int frame_index) const override;
    int frame_count(const std::string& video_id) const override;

private:
    std::string root_;
};

enum class SampleMode { train_uniform, test_topk };

// Crop `box` out of `frame` with size/center jitter and resize to
// crop_size x crop_size. The sampled factor scales the box sides, and the
// center is offset uniformly within +-(jitter_factor-1)*side/2 per axis.
// jitter_factor == 1 is exactly the resized source box for any rng state.
RegionCrop crop_with_jitter(const Image& frame, const Box& box, double jitter_factor,
                            int crop_size, Rng& rng);

// Lightweight descriptor used before pixels are materialized.
struct RegionRef {
    int frame_index = 0;
    Box box;
    double confidence = 0.0;
};

// Pool of candidate regions of one video (already thresholded / capped).
struct VideoPool {
    std::string video_id;
    std::vector<RegionRef> regions;
    std::optional<int> verb_label;
    std::optional<int> noun_label;
};

// Draw n regions from the pool. train_uniform samples without replacement
// (with replacement only if the pool is smaller than n); test_topk returns
// the n most confident regions deterministically, ties by box coordinates.
std::vector<RegionRef> sample_regions(const VideoPool& pool, int n, SampleMode mode,
                                      Rng& rng);

// TSN-style segment sampling: split [0, n_frames) into n_segments equal
// parts; center frame of each at test time, uniform within the segment at
// train time. Returns a sorted frame index list (n_segments entries).
std::vector<int> sample_frames(int n_frames, int n_segments, bool train, Rng& rng);

// Assemble a per-video pool: TSN-sample frames, then threshold and cap the
// detections on those frames.
VideoPool build_pool(const std::string& video_id,
                     const std::vector<DetectionRecord>& video_records,
                     int n_frames, int frames_per_video, bool train,
                     double conf_threshold, int max_per_frame, Rng& rng);

// Materialize crops for sampled refs through the frame provider.
std::vector<RegionCrop> materialize(const std::string& video_id,
                                    const std::vector<RegionRef>& refs,
                                    const FrameProvider& frames, double jitter_lo,
                                    double jitter_hi, int crop_size, Rng& rng);

// Manifest records grouped per video (first-appearance order preserved),
// bound to a frame source. The common input of both training engines.
struct RegionDataset {
    const FrameProvider* frames = nullptr;
    std::vector<std::string> video_ids;
    std::map<std::string, std::vector<DetectionRecord>> records_by_video;
};

RegionDataset make_dataset(const std::vector<DetectionRecord>& records,
                           const FrameProvider& frames);

}  // namespace setswav
