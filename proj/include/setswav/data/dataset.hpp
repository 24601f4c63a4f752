#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace setswav::data {

// Video-level labels. Split is "train" or "val".
struct VideoLabel {
    std::string video_id;
    int verb = 0;
    int noun = 0;
    int participant = 0;
    std::string split;
};

inline constexpr const char* kLabelsHeader = "video_id verb noun participant split";

// Label-space declaration plus the evaluation splits. Tail classes and
// unseen participants are declared here, never inferred downstream.
struct DatasetHeader {
    int n_verbs = 0;
    int n_nouns = 0;
    std::vector<int> tail_verbs;
    std::vector<int> tail_nouns;
    std::vector<std::pair<int, int>> tail_actions;  // (verb, noun) pairs
    std::vector<int> unseen_participants;
    // Free-form provenance echoed by the generator (stored verbatim).
    std::string extra_json = "{}";
};

std::string format_labels(const std::vector<VideoLabel>& labels);
std::vector<VideoLabel> parse_labels(const std::string& text);
void write_labels(const std::string& path, const std::vector<VideoLabel>& labels);
std::vector<VideoLabel> load_labels(const std::string& path);

std::string format_header(const DatasetHeader& h);
DatasetHeader parse_header(const std::string& text);
void write_header(const std::string& path, const DatasetHeader& h);
DatasetHeader load_header(const std::string& path);

// Validates every label against the header's label spaces.
void check_labels(const std::vector<VideoLabel>& labels, const DatasetHeader& h);

std::map<std::string, VideoLabel> labels_by_id(const std::vector<VideoLabel>& labels);
std::vector<VideoLabel> filter_split(const std::vector<VideoLabel>& labels, const std::string& split);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace setswav::data
