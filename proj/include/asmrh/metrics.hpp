#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace asmrh {

struct MetricsReport {
    std::string split;
    std::size_t epoch = 0;
    double loss = 0.0;
    double acc = 0.0;
    double auc = 0.0;

    std::string to_json() const;  // single line, keys sorted
};

// Row-wise softmax of an N x K logit matrix, in place.
void softmax_rows(std::vector<double>& logits, std::size_t k);

// Fraction of rows whose argmax equals the label; ties resolve to the
// lowest index.
double accuracy(const std::vector<double>& scores, std::size_t k,
                const std::vector<std::size_t>& labels);

// Macro one-vs-rest ROC area from rank statistics; tied scores get average
// ranks, so a tied positive/negative pair contributes 1/2, matching the
// pairwise definition exactly. Classes absent from `labels` (or covering all
// of it) are excluded from the average and appended to `excluded` when given.
double macro_auc(const std::vector<double>& scores, std::size_t k,
                 const std::vector<std::size_t>& labels,
                 std::vector<std::size_t>* excluded = nullptr);

// One class against the rest, rank-based. n_pos and n_neg must be positive.
double auc_one_vs_rest(const std::vector<double>& class_scores,
                       const std::vector<bool>& is_positive);

}  // namespace asmrh
