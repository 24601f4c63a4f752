#include "setswav/data/dataset.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "setswav/core/errors.hpp"

namespace setswav::data {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write file: " + path);
    f << text;
    if (!f) throw DataError("write failed: " + path);
}

std::string format_labels(const std::vector<VideoLabel>& labels) {
    std::string out = kLabelsHeader;
    out.push_back('\n');
    for (const VideoLabel& l : labels) {
        out += l.video_id;
        out += ' ';
        out += std::to_string(l.verb);
        out += ' ';
        out += std::to_string(l.noun);
        out += ' ';
        out += std::to_string(l.participant);
        out += ' ';
        out += l.split;
        out.push_back('\n');
    }
    return out;
}

std::vector<VideoLabel> parse_labels(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<VideoLabel> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != kLabelsHeader)
                throw MalformedRow("labels line 1: expected header '" + std::string(kLabelsHeader) + "'");
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ls(line);
        VideoLabel l;
        std::string extra;
        if (!(ls >> l.video_id >> l.verb >> l.noun >> l.participant >> l.split) || (ls >> extra))
            throw MalformedRow("labels line " + std::to_string(line_no) + ": expected 5 fields");
        if (l.verb < 0 || l.noun < 0 || l.participant < 0)
            throw MalformedRow("labels line " + std::to_string(line_no) + ": negative id");
        if (l.split != "train" && l.split != "val")
            throw MalformedRow("labels line " + std::to_string(line_no) + ": split must be train or val");
        out.push_back(std::move(l));
    }
    if (out.empty()) throw EmptyManifest("labels file contains no rows");
    return out;
}

void write_labels(const std::string& path, const std::vector<VideoLabel>& labels) {
    write_text_file(path, format_labels(labels));
}

std::vector<VideoLabel> load_labels(const std::string& path) {
    return parse_labels(read_text_file(path));
}

std::string format_header(const DatasetHeader& h) {
    json j;
    j["version"] = 1;
    j["n_verbs"] = h.n_verbs;
    j["n_nouns"] = h.n_nouns;
    j["tail_verbs"] = h.tail_verbs;
    j["tail_nouns"] = h.tail_nouns;
    json pairs = json::array();
    for (const auto& [v, n] : h.tail_actions) pairs.push_back(json::array({v, n}));
    j["tail_actions"] = pairs;
    j["unseen_participants"] = h.unseen_participants;
    j["extra"] = json::parse(h.extra_json);
    return j.dump(2) + "\n";
}

DatasetHeader parse_header(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("header is not valid JSON: ") + e.what());
    }
    try {
        DatasetHeader h;
        if (j.value("version", 0) != 1) throw VersionMismatch("unsupported header version");
        h.n_verbs = j.at("n_verbs").get<int>();
        h.n_nouns = j.at("n_nouns").get<int>();
        h.tail_verbs = j.at("tail_verbs").get<std::vector<int>>();
        h.tail_nouns = j.at("tail_nouns").get<std::vector<int>>();
        for (const auto& p : j.at("tail_actions"))
            h.tail_actions.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
        h.unseen_participants = j.at("unseen_participants").get<std::vector<int>>();
        h.extra_json = j.value("extra", json::object()).dump();
        if (h.n_verbs < 1 || h.n_nouns < 1) throw DataError("header declares an empty label space");
        return h;
    } catch (const json::exception& e) {
        throw DataError(std::string("header missing required field: ") + e.what());
    }
}

void write_header(const std::string& path, const DatasetHeader& h) {
    write_text_file(path, format_header(h));
}

DatasetHeader load_header(const std::string& path) {
    return parse_header(read_text_file(path));
}

void check_labels(const std::vector<VideoLabel>& labels, const DatasetHeader& h) {
    for (const VideoLabel& l : labels) {
        if (l.verb >= h.n_verbs)
            throw LabelOutOfRange("video " + l.video_id + " verb " + std::to_string(l.verb) +
                                  " outside label space of " + std::to_string(h.n_verbs));
        if (l.noun >= h.n_nouns)
            throw LabelOutOfRange("video " + l.video_id + " noun " + std::to_string(l.noun) +
                                  " outside label space of " + std::to_string(h.n_nouns));
    }
}

std::map<std::string, VideoLabel> labels_by_id(const std::vector<VideoLabel>& labels) {
    std::map<std::string, VideoLabel> out;
    for (const VideoLabel& l : labels) out[l.video_id] = l;
    return out;
}

std::vector<VideoLabel> filter_split(const std::vector<VideoLabel>& labels, const std::string& split) {
    std::vector<VideoLabel> out;
    for (const VideoLabel& l : labels)
        if (l.split == split) out.push_back(l);
    return out;
}

}  // namespace setswav::data
