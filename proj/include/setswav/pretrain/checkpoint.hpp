#pragma once

#include <string>
#include <vector>

#include "setswav/model/layers.hpp"

namespace setswav::pretrain {

// Versioned container of named float32 arrays plus a JSON metadata block.
// save followed by load is bit-exact; the trailing checksum covers the whole
// file. Metadata holds config echo, seed, and epoch; wall-clock time is
// deliberately excluded so repeated runs produce byte-identical files.
struct CheckpointArray {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::string meta_json = "{}";
    std::vector<CheckpointArray> arrays;

    const CheckpointArray* find(const std::string& name) const;
    void add(const model::ParamTensor& p);
    // Copies data into the tensor; throws CorruptCheckpoint on a shape
    // mismatch, DataError when the name is absent and required.
    void restore(model::ParamTensor& p, bool required = true) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Stable content hash of a config document (used as the checkpoint's
// config_hash field and for run provenance).
std::string content_hash(const std::string& text);

}  // namespace setswav::pretrain
