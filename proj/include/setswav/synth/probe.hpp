#pragma once

#include <vector>

namespace setswav::synth {

struct ProbeResult {
    double train_accuracy = 0.0;
    double held_out_accuracy = 0.0;
    int iterations = 0;
};

// Multinomial logistic probe on frozen embeddings. Fully deterministic:
// a per-class in-order split, train-set standardization, and full-batch
// Nesterov gradient descent with a Lipschitz step size, run until the
// gradient max-norm drops below 1e-6. Ridge term 1e-4 makes the optimum
// unique. Throws DegenerateLabels when the train portion has < 2 classes.
ProbeResult oracle_linear_probe(const std::vector<std::vector<double>>& embeddings,
                                const std::vector<int>& labels, int n_classes,
                                double held_out_fraction);

}  // namespace setswav::synth
