#pragma once

#include <memory>
#include <string>
#include <vector>

#include "setswav/finetune/finetune.hpp"
#include "setswav/fusion/metrics.hpp"
#include "setswav/pretrain/trainer.hpp"
#include "setswav/synth/probe.hpp"
#include "setswav/synth/synth.hpp"

namespace setswav::pipeline {

struct FuseConfig {
    double pilot_fraction = 0.3;
    std::vector<fusion::WeightPair> grid;  // empty means the default 11x11 grid
    uint64_t seed = 1;

    void validate() const;
    std::string to_json() const;
};

// One document covering every stage. A run is reconstructable from the
// resolved dump plus the seed(s) inside it.
struct RunConfig {
    int version = 1;
    int threads = 1;
    std::string out_dir = "out";
    bool write_frames = true;
    synth::SynthSpec synth;
    pretrain::PretrainConfig pretrain;
    finetune::FinetuneConfig finetune;
    FuseConfig fuse;

    // Strict parse: unknown keys anywhere are config errors.
    static RunConfig from_json_text(const std::string& text);
    std::string to_json() const;
    // Dumps the resolved config and its content hash next to the outputs.
    void write_resolved(const std::string& dir, const std::string& command) const;
};

// A dataset directory bound to a frame source. When the directory has no
// frames/ tree but the header carries a synthetic spec, frames are
// re-rendered in memory (bit-identical to the on-disk PPM path).
struct LoadedDataset {
    std::unique_ptr<FrameProvider> provider;
    std::vector<DetectionRecord> records;
    RegionDataset dataset;
    std::vector<data::VideoLabel> labels;
    data::DatasetHeader header;
};

LoadedDataset load_dataset(const std::string& dir);
LoadedDataset dataset_from_memory(synth::GeneratedDataset ds);

// Stage runners shared by the CLI and the acceptance tests. Each writes its
// outputs (and the resolved config) under cfg.out_dir.
std::string run_generate(const RunConfig& cfg);  // returns the dataset directory
pretrain::PretrainResult run_pretrain(const RunConfig& cfg, const LoadedDataset& ds);
finetune::FinetuneResult run_finetune(const RunConfig& cfg, const LoadedDataset& ds);

struct FuseRun {
    fusion::FusionWeights weights;
    std::vector<fusion::LogitRecord> fused;
    std::string fused_path;
};
// Selects weights on the train-split pilot, fuses every aligned record.
FuseRun run_fuse(const RunConfig& cfg, const LoadedDataset& ds,
                 const std::vector<fusion::LogitRecord>& oic,
                 const std::vector<fusion::LogitRecord>& base);

// Scores the val split: records are filtered to val-split videos.
fusion::EvalReport run_eval(const LoadedDataset& ds,
                            const std::vector<fusion::LogitRecord>& records);

// Frozen-encoder video embeddings (mean over test-mode region features), one
// row per entry of ds.labels, in that order. init is "random" or
// "external:PATH".
std::vector<std::vector<double>> embed_videos(const LoadedDataset& ds,
                                              const pretrain::PretrainConfig& cfg,
                                              const std::string& init);
synth::ProbeResult probe_space(const LoadedDataset& ds,
                               const std::vector<std::vector<double>>& embeddings,
                               const std::string& space, double held_out_fraction);

struct AblateResult {
    std::string table_text;
    std::string json_text;
};
// Two 4-row grids: fine-tune {random, pretrained} x {ce, lt} scored on the
// val split, and pre-train {random, stage-1} x {swav, swav_s} scored by
// linear probe.
AblateResult run_ablate(const RunConfig& cfg);

}  // namespace setswav::pipeline
