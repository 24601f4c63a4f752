#include "setswav/region/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "setswav/core/errors.hpp"

namespace setswav {

namespace {

const char* kHeader = "video_id frame_index x1 y1 x2 y2 confidence kind";

bool parse_double(const std::string& s, double& out) {
    try {
        size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

bool parse_int(const std::string& s, int& out) {
    try {
        size_t pos = 0;
        out = std::stoi(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

}  // namespace

std::vector<DetectionRecord> parse_manifest(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    std::vector<DetectionRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kHeader)
                throw MalformedRow("line " + std::to_string(line_no) +
                                   " (expected header '" + kHeader + "')");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string f[8];
        for (int i = 0; i < 8; ++i) {
            if (!(ls >> f[i]))
                throw MalformedRow("line " + std::to_string(line_no) +
                                   " (expected 8 fields)");
        }
        std::string extra;
        if (ls >> extra)
            throw MalformedRow("line " + std::to_string(line_no) + " (trailing fields)");

        DetectionRecord r;
        r.video_id = f[0];
        if (!parse_int(f[1], r.frame_index) || r.frame_index < 0)
            throw MalformedRow("line " + std::to_string(line_no) + " (frame_index)");
        if (!parse_double(f[2], r.x1) || !parse_double(f[3], r.y1) ||
            !parse_double(f[4], r.x2) || !parse_double(f[5], r.y2))
            throw MalformedRow("line " + std::to_string(line_no) + " (box)");
        if (!(r.x1 < r.x2) || !(r.y1 < r.y2))
            throw MalformedRow("line " + std::to_string(line_no) +
                               " (box must satisfy x1<x2, y1<y2)");
        if (!parse_double(f[6], r.confidence) || r.confidence < 0.0 || r.confidence > 1.0)
            throw MalformedRow("line " + std::to_string(line_no) +
                               " (confidence outside [0,1])");
        if (f[7] == "object")
            r.kind = DetKind::object;
        else if (f[7] == "hand")
            r.kind = DetKind::hand;
        else
            throw MalformedRow("line " + std::to_string(line_no) + " (kind)");

        if (r.kind == DetKind::object) out.push_back(std::move(r));
    }
    if (!header_seen) throw MalformedRow("line 1 (missing header)");
    if (out.empty()) throw EmptyManifest("no object rows");
    return out;
}

std::vector<DetectionRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str());
}

std::string format_manifest(const std::vector<DetectionRecord>& records) {
    std::string out(kHeader);
    out += '\n';
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%s %d %.2f %.2f %.2f %.2f %.6f %s\n",
                      r.video_id.c_str(), r.frame_index, r.x1, r.y1, r.x2, r.y2,
                      r.confidence, r.kind == DetKind::object ? "object" : "hand");
        out += buf;
    }
    return out;
}

void write_manifest(const std::string& path, const std::vector<DetectionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_manifest: cannot open " + path);
    out << format_manifest(records);
    if (!out) throw DataError("write_manifest: short write to " + path);
}

std::vector<DetectionRecord> select_regions(const std::vector<DetectionRecord>& records,
                                            double conf_threshold, int max_per_frame) {
    if (conf_threshold < 0.0 || conf_threshold >= 1.0)
        throw ConfigError("select_regions: conf_threshold must be in [0,1)");
    if (max_per_frame < 1)
        throw ConfigError("select_regions: max_per_frame must be >= 1");

    // Group per (video, frame) in first-appearance order.
    std::vector<std::pair<std::string, int>> frame_order;
    std::map<std::pair<std::string, int>, std::vector<DetectionRecord>> groups;
    for (const auto& r : records) {
        if (!(r.confidence > conf_threshold)) continue;  // strictly greater
        auto key = std::make_pair(r.video_id, r.frame_index);
        auto it = groups.find(key);
        if (it == groups.end()) {
            frame_order.push_back(key);
            groups[key].push_back(r);
        } else {
            it->second.push_back(r);
        }
    }

    std::vector<DetectionRecord> out;
    for (const auto& key : frame_order) {
        auto& g = groups[key];
        std::stable_sort(g.begin(), g.end(), [](const DetectionRecord& a,
                                                const DetectionRecord& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            return std::tie(a.x1, a.y1, a.x2, a.y2) < std::tie(b.x1, b.y1, b.x2, b.y2);
        });
        int keep = std::min<int>(max_per_frame, static_cast<int>(g.size()));
        for (int i = 0; i < keep; ++i) out.push_back(g[static_cast<size_t>(i)]);
    }
    return out;
}

}  // namespace setswav
