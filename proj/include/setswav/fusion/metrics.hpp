#pragma once

#include <string>
#include <vector>

#include "setswav/fusion/fusion.hpp"

namespace setswav::fusion {

// Fraction of videos whose true class sits in the top k, space one of
// "verb" | "noun" | "action". Non-decreasing in k.
double topk_accuracy(const std::vector<LogitRecord>& records,
                     const std::vector<data::VideoLabel>& labels, int k,
                     const std::string& space);

// Unweighted mean of per-class top-1 accuracies over the classes present
// in the evaluation set.
double class_balanced_accuracy(const std::vector<LogitRecord>& records,
                               const std::vector<data::VideoLabel>& labels,
                               const std::string& space);

// Metrics over one subset of the videos; n == 0 marks not-applicable.
struct SubsetMetrics {
    int n = 0;
    double top1 = 0.0;
    double top5 = 0.0;
};

struct SpaceReport {
    SubsetMetrics overall;
    SubsetMetrics tail;    // videos whose label in this space is a tail class
    SubsetMetrics unseen;  // videos of unseen participants
    double class_balanced = 0.0;
};

struct ClassAccuracy {
    int class_id = 0;
    int count = 0;
    double accuracy = 0.0;
};

struct ActionAccuracy {
    int verb = 0;
    int noun = 0;
    int count = 0;
    double accuracy = 0.0;
};

struct EvalReport {
    int n_videos = 0;
    SpaceReport verb, noun, action;
    std::vector<ClassAccuracy> verb_classes;  // classes present in the set
    std::vector<ClassAccuracy> noun_classes;
    std::vector<ActionAccuracy> action_classes;

    std::string to_table() const;
    std::string to_json() const;
};

// Full report over one record set. Tail classes and unseen participants
// come from the dataset header, never inferred here. Every label needs a
// record and every record a label.
EvalReport evaluate(const std::vector<LogitRecord>& records,
                    const std::vector<data::VideoLabel>& labels,
                    const data::DatasetHeader& header);

}  // namespace setswav::fusion
