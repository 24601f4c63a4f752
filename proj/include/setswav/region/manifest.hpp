#pragma once

#include <string>
#include <vector>

namespace setswav {

enum class DetKind { object, hand };

// One detector output row. Boxes are pixel coordinates with x1 < x2, y1 < y2;
// confidence lies in [0, 1].
struct DetectionRecord {
    std::string video_id;
    int frame_index = 0;
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double confidence = 0;
    DetKind kind = DetKind::object;
};

// Plain-text columnar manifest, one record per line, header line required:
//   video_id frame_index x1 y1 x2 y2 confidence kind
// Coordinates are written with 2 decimals and confidence with 6, so a
// parse -> write cycle reproduces the file byte for byte.
std::vector<DetectionRecord> load_manifest(const std::string& path);

// Parse from an already-loaded string (used by tests and the generator).
std::vector<DetectionRecord> parse_manifest(const std::string& text);

std::string format_manifest(const std::vector<DetectionRecord>& records);
void write_manifest(const std::string& path, const std::vector<DetectionRecord>& records);

// Keeps records with confidence strictly above conf_threshold and at most
// max_per_frame per (video, frame), by descending confidence; ties broken by
// (x1, y1, x2, y2) lexicographic order. Input order of frames is preserved.
std::vector<DetectionRecord> select_regions(const std::vector<DetectionRecord>& records,
                                            double conf_threshold, int max_per_frame);

}  // namespace setswav
