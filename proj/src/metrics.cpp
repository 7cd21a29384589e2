#include "asmrh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "asmrh/errors.hpp"

namespace asmrh {

namespace {

// Shortest representation that round-trips a double; matches common JSON
// writers so the metrics stream is stable and parseable.
std::string format_double(double v) {
    for (int prec = 1; prec <= 17; ++prec) {
        std::ostringstream os;
        os.precision(prec);
        os << v;
        if (std::stod(os.str()) == v) return os.str();
    }
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string MetricsReport::to_json() const {
    std::ostringstream os;
    os << "{\"acc\":" << format_double(acc) << ",\"auc\":" << format_double(auc)
       << ",\"epoch\":" << epoch << ",\"loss\":" << format_double(loss) << ",\"split\":\""
       << split << "\"}";
    return os.str();
}

void softmax_rows(std::vector<double>& logits, std::size_t k) {
    if (k == 0 || logits.size() % k != 0)
        throw ShapeError(msg("softmax_rows: buffer of ", logits.size(),
                             " values is not a multiple of k = ", k));
    const std::size_t rows = logits.size() / k;
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = logits.data() + r * k;
        const double m = *std::max_element(row, row + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row[j] = std::exp(row[j] - m);
            sum += row[j];
        }
        for (std::size_t j = 0; j < k; ++j) row[j] /= sum;
    }
}

double accuracy(const std::vector<double>& scores, std::size_t k,
                const std::vector<std::size_t>& labels) {
    if (labels.empty()) throw DataError("accuracy: empty label set");
    if (scores.size() != labels.size() * k)
        throw ShapeError(msg("accuracy: ", scores.size(), " scores do not match ",
                             labels.size(), " x ", k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* row = scores.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double auc_one_vs_rest(const std::vector<double>& class_scores,
                       const std::vector<bool>& is_positive) {
    const std::size_t n = class_scores.size();
    if (is_positive.size() != n)
        throw ShapeError("auc_one_vs_rest: scores and labels differ in length");
    std::size_t n_pos = 0;
    for (bool p : is_positive) n_pos += p ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("auc_one_vs_rest: needs at least one positive and one negative");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return class_scores[a] < class_scores[b];
    });

    // average 1-based rank over each tie group
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && class_scores[order[j]] == class_scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (is_positive[order[t]]) pos_rank_sum += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) /
           (np * static_cast<double>(n_neg));
}

double macro_auc(const std::vector<double>& scores, std::size_t k,
                 const std::vector<std::size_t>& labels,
                 std::vector<std::size_t>* excluded) {
    if (labels.empty()) throw DataError("macro_auc: empty label set");
    if (scores.size() != labels.size() * k)
        throw ShapeError(msg("macro_auc: ", scores.size(), " scores do not match ",
                             labels.size(), " x ", k));
    const std::size_t n = labels.size();
    std::vector<double> col(n);
    std::vector<bool> pos(n);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = scores[i * k + c];
            pos[i] = labels[i] == c;
            n_pos += pos[i] ? 1 : 0;
        }
        if (n_pos == 0 || n_pos == n) {
            if (excluded) excluded->push_back(c);
            continue;
        }
        sum += auc_one_vs_rest(col, pos);
        ++used;
    }
    // every class degenerate (single-class split): chance level by convention
    if (used == 0) return 0.5;
    return sum / static_cast<double>(used);
}

}  // namespace asmrh
