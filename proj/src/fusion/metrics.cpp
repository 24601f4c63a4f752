#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "json.hpp"
#include "setswav/core/errors.hpp"
#include "setswav/fusion/metrics.hpp"

namespace setswav::fusion {

using nlohmann::json;

namespace {

struct Scored {
    int verb = 0, noun = 0, participant = 0;
    int verb_rank = 0, noun_rank = 0, act_rank = 0;
};

// Joins records and labels by video_id (strict: one record per label and no
// strays) and computes each video's class ranks once.
std::vector<Scored> score_all(const std::vector<LogitRecord>& records,
                              const std::vector<data::VideoLabel>& labels) {
    std::map<std::string, const LogitRecord*> by_id;
    for (const LogitRecord& r : records)
        if (!by_id.emplace(r.video_id, &r).second)
            throw VideoMismatch("duplicate record for " + r.video_id);
    if (by_id.size() != labels.size())
        throw UnknownVideo("record and label sets differ in size");
    std::vector<Scored> out;
    out.reserve(labels.size());
    for (const data::VideoLabel& lab : labels) {
        auto it = by_id.find(lab.video_id);
        if (it == by_id.end()) throw UnknownVideo("no record for " + lab.video_id);
        Scored s;
        s.verb = lab.verb;
        s.noun = lab.noun;
        s.participant = lab.participant;
        s.verb_rank = class_rank(it->second->verb_logits, lab.verb);
        s.noun_rank = class_rank(it->second->noun_logits, lab.noun);
        s.act_rank = action_rank(*it->second, lab.verb, lab.noun);
        out.push_back(s);
    }
    return out;
}

int rank_of(const Scored& s, const std::string& space) {
    if (space == "verb") return s.verb_rank;
    if (space == "noun") return s.noun_rank;
    if (space == "action") return s.act_rank;
    throw ConfigError("unknown label space: " + space);
}

SubsetMetrics subset_metrics(const std::vector<Scored>& scored, const std::vector<char>& in,
                             const std::string& space) {
    SubsetMetrics m;
    int h1 = 0, h5 = 0;
    for (size_t i = 0; i < scored.size(); ++i) {
        if (!in[i]) continue;
        ++m.n;
        const int r = rank_of(scored[i], space);
        if (r < 1) ++h1;
        if (r < 5) ++h5;
    }
    if (m.n > 0) {
        m.top1 = static_cast<double>(h1) / m.n;
        m.top5 = static_cast<double>(h5) / m.n;
    }
    return m;
}

double balanced_from_scored(const std::vector<Scored>& scored, const std::string& space,
                            int n_nouns) {
    std::map<long, std::pair<int, int>> per_class;  // key -> (count, hits)
    for (const Scored& s : scored) {
        long key;
        if (space == "verb") key = s.verb;
        else if (space == "noun") key = s.noun;
        else key = static_cast<long>(s.verb) * n_nouns + s.noun;
        auto& [count, hits] = per_class[key];
        ++count;
        if (rank_of(s, space) < 1) ++hits;
    }
    if (per_class.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [key, ch] : per_class) sum += static_cast<double>(ch.second) / ch.first;
    return sum / static_cast<double>(per_class.size());
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

double topk_accuracy(const std::vector<LogitRecord>& records,
                     const std::vector<data::VideoLabel>& labels, int k,
                     const std::string& space) {
    if (k < 1) throw ConfigError("topk_accuracy: k must be >= 1");
    const std::vector<Scored> scored = score_all(records, labels);
    if (scored.empty()) return 0.0;
    int hits = 0;
    for (const Scored& s : scored)
        if (rank_of(s, space) < k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(scored.size());
}

double class_balanced_accuracy(const std::vector<LogitRecord>& records,
                               const std::vector<data::VideoLabel>& labels,
                               const std::string& space) {
    const std::vector<Scored> scored = score_all(records, labels);
    const int n_nouns = records.empty() ? 1 : static_cast<int>(records[0].noun_logits.size());
    return balanced_from_scored(scored, space, n_nouns);
}

EvalReport evaluate(const std::vector<LogitRecord>& records,
                    const std::vector<data::VideoLabel>& labels,
                    const data::DatasetHeader& header) {
    finetune::check_logit_records(records, header);
    const std::vector<Scored> scored = score_all(records, labels);
    const size_t n = scored.size();

    const std::set<int> tail_verbs(header.tail_verbs.begin(), header.tail_verbs.end());
    const std::set<int> tail_nouns(header.tail_nouns.begin(), header.tail_nouns.end());
    const std::set<std::pair<int, int>> tail_actions(header.tail_actions.begin(),
                                                     header.tail_actions.end());
    const std::set<int> unseen(header.unseen_participants.begin(),
                               header.unseen_participants.end());

    std::vector<char> all(n, 1), in_unseen(n, 0);
    std::vector<char> vtail(n, 0), ntail(n, 0), atail(n, 0);
    for (size_t i = 0; i < n; ++i) {
        in_unseen[i] = unseen.count(scored[i].participant) ? 1 : 0;
        vtail[i] = tail_verbs.count(scored[i].verb) ? 1 : 0;
        ntail[i] = tail_nouns.count(scored[i].noun) ? 1 : 0;
        atail[i] = tail_actions.count({scored[i].verb, scored[i].noun}) ? 1 : 0;
    }

    EvalReport rep;
    rep.n_videos = static_cast<int>(n);
    for (const std::string& space : {"verb", "noun", "action"}) {
        SpaceReport sr;
        sr.overall = subset_metrics(scored, all, space);
        sr.tail = subset_metrics(scored, space == "verb" ? vtail : space == "noun" ? ntail : atail,
                                 space);
        sr.unseen = subset_metrics(scored, in_unseen, space);
        sr.class_balanced = balanced_from_scored(scored, space, header.n_nouns);
        if (space == "verb") rep.verb = sr;
        else if (space == "noun") rep.noun = sr;
        else rep.action = sr;
    }

    std::map<int, std::pair<int, int>> vcls, ncls;
    std::map<std::pair<int, int>, std::pair<int, int>> acls;
    for (const Scored& s : scored) {
        auto& v = vcls[s.verb];
        ++v.first;
        if (s.verb_rank < 1) ++v.second;
        auto& nn = ncls[s.noun];
        ++nn.first;
        if (s.noun_rank < 1) ++nn.second;
        auto& a = acls[{s.verb, s.noun}];
        ++a.first;
        if (s.act_rank < 1) ++a.second;
    }
    for (const auto& [id, ch] : vcls)
        rep.verb_classes.push_back({id, ch.first, static_cast<double>(ch.second) / ch.first});
    for (const auto& [id, ch] : ncls)
        rep.noun_classes.push_back({id, ch.first, static_cast<double>(ch.second) / ch.first});
    for (const auto& [id, ch] : acls)
        rep.action_classes.push_back(
            {id.first, id.second, ch.first, static_cast<double>(ch.second) / ch.first});
    return rep;
}

namespace {

void table_row(std::string& out, const std::string& space, const std::string& subset,
               const SubsetMetrics& m) {
    char buf[128];
    if (m.n == 0) {
        std::snprintf(buf, sizeof buf, "%-7s %-8s %5s %7s %7s\n", space.c_str(), subset.c_str(),
                      "0", "n/a", "n/a");
    } else {
        std::snprintf(buf, sizeof buf, "%-7s %-8s %5d %7.3f %7.3f\n", space.c_str(),
                      subset.c_str(), m.n, m.top1, m.top5);
    }
    out += buf;
}

json subset_json(const SubsetMetrics& m) {
    json j;
    j["n"] = m.n;
    if (m.n == 0) {
        j["top1"] = nullptr;
        j["top5"] = nullptr;
    } else {
        j["top1"] = m.top1;
        j["top5"] = m.top5;
    }
    return j;
}

json space_json(const SpaceReport& sr) {
    json j;
    j["overall"] = subset_json(sr.overall);
    j["tail"] = subset_json(sr.tail);
    j["unseen"] = subset_json(sr.unseen);
    j["class_balanced"] = sr.class_balanced;
    return j;
}

}  // namespace

std::string EvalReport::to_table() const {
    std::string out;
    out += "videos: " + std::to_string(n_videos) + "\n";
    out += "space   subset       n    top1    top5\n";
    table_row(out, "verb", "overall", verb.overall);
    table_row(out, "verb", "tail", verb.tail);
    table_row(out, "verb", "unseen", verb.unseen);
    table_row(out, "noun", "overall", noun.overall);
    table_row(out, "noun", "tail", noun.tail);
    table_row(out, "noun", "unseen", noun.unseen);
    table_row(out, "action", "overall", action.overall);
    table_row(out, "action", "tail", action.tail);
    table_row(out, "action", "unseen", action.unseen);
    out += "class-balanced: verb " + fmt3(verb.class_balanced) + "  noun " +
           fmt3(noun.class_balanced) + "  action " + fmt3(action.class_balanced) + "\n";
    out += "per-class verb:";
    for (const ClassAccuracy& c : verb_classes)
        out += " " + std::to_string(c.class_id) + ":" + fmt3(c.accuracy) + "(" +
               std::to_string(c.count) + ")";
    out += "\nper-class noun:";
    for (const ClassAccuracy& c : noun_classes)
        out += " " + std::to_string(c.class_id) + ":" + fmt3(c.accuracy) + "(" +
               std::to_string(c.count) + ")";
    out += "\n";
    return out;
}

std::string EvalReport::to_json() const {
    json j;
    j["n_videos"] = n_videos;
    j["verb"] = space_json(verb);
    j["noun"] = space_json(noun);
    j["action"] = space_json(action);
    json vc = json::array(), nc = json::array(), ac = json::array();
    for (const ClassAccuracy& c : verb_classes)
        vc.push_back({{"class", c.class_id}, {"count", c.count}, {"accuracy", c.accuracy}});
    for (const ClassAccuracy& c : noun_classes)
        nc.push_back({{"class", c.class_id}, {"count", c.count}, {"accuracy", c.accuracy}});
    for (const ActionAccuracy& c : action_classes)
        ac.push_back({{"verb", c.verb},
                      {"noun", c.noun},
                      {"count", c.count},
                      {"accuracy", c.accuracy}});
    j["verb_classes"] = vc;
    j["noun_classes"] = nc;
    j["action_classes"] = ac;
    return j.dump(2);
}

}  // namespace setswav::fusion
