#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asmrh/audio.hpp"
#include "asmrh/errors.hpp"
#include "asmrh/metrics.hpp"
#include "asmrh/mixer.hpp"
#include "asmrh/tensor.hpp"

namespace asmrh {

struct TrainConfig {
    double lr0 = 2.5e-4;
    std::size_t decay_start_epoch = 5;
    double decay_factor = 0.85;  // per-epoch multiplicative
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double weight_decay = 0.0;

    void validate() const {
        if (!(lr0 > 0)) throw ConfigError(msg("TrainConfig: lr0 = ", lr0, " must be > 0"));
        if (!(decay_factor > 0) || decay_factor > 1)
            throw ConfigError(msg("TrainConfig: decay_factor = ", decay_factor,
                                  " must be in (0, 1]"));
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    }
};

// Constant lr0 before decay_start_epoch, then multiplied by decay_factor
// once per epoch.
inline double lr_at(std::size_t epoch, const TrainConfig& cfg) {
    if (epoch < cfg.decay_start_epoch) return cfg.lr0;
    return cfg.lr0 * std::pow(cfg.decay_factor,
                              static_cast<double>(epoch - cfg.decay_start_epoch + 1));
}

// Mean of -log softmax(logits)[label], stabilized by row-max subtraction.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2)
        throw ShapeError(msg("cross_entropy: expected (B, K) logits, got ",
                             shape_str(logits.shape())));
    const std::size_t B = logits.shape()[0], K = logits.shape()[1];
    if (labels.size() != B)
        throw ShapeError(msg("cross_entropy: ", labels.size(), " labels for batch of ", B));
    for (std::size_t i = 0; i < B; ++i)
        if (labels[i] >= K)
            throw DataError(msg("cross_entropy: row ", i, ": label ", labels[i],
                                " out of range [0, ", K, ")"));

    std::vector<T> probs(B * K);
    T total = T(0);
    for (std::size_t i = 0; i < B; ++i) {
        const T* row = logits.data() + i * K;
        T m = row[0];
        for (std::size_t j = 1; j < K; ++j) m = std::max(m, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < K; ++j) {
            probs[i * K + j] = std::exp(row[j] - m);
            sum += probs[i * K + j];
        }
        for (std::size_t j = 0; j < K; ++j) probs[i * K + j] /= sum;
        total += m + std::log(sum) - row[labels[i]];
    }
    Tensor<T> out = Tensor<T>::scalar(total / T(B));
    maybe_check_finite(out, "cross_entropy");

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = logits.node, on = out.node;
        tape->record(on, [xn, on, B, K, labels, probs = std::move(probs)] {
            ensure_grad(*xn);
            const T g = on->grad[0] / T(B);
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < K; ++j)
                    xn->grad[i * K + j] +=
                        g * (probs[i * K + j] - (labels[i] == j ? T(1) : T(0)));
        });
    }
    return out;
}

// Adam with decoupled weight decay (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
template <typename T>
class Adam {
public:
    explicit Adam(std::vector<NamedParam<T>>& params, double weight_decay = 0.0)
        : params_(&params), weight_decay_(weight_decay) {
        for (const NamedParam<T>& p : params) {
            m_.emplace_back(p.tensor.numel(), T(0));
            v_.emplace_back(p.tensor.numel(), T(0));
        }
    }

    std::size_t step_count() const { return step_; }

    void step(double lr) {
        ++step_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        for (std::size_t p = 0; p < params_->size(); ++p) {
            Tensor<T>& t = (*params_)[p].tensor;
            if (t.numel() != m_[p].size())
                throw Error(msg("adam_step: parameter '", (*params_)[p].name,
                                "' changed size mid-run"));
            if (!t.has_grad()) continue;
            const T* g = t.grad().data();
            T* w = t.data();
            for (std::size_t i = 0; i < m_[p].size(); ++i) {
                m_[p][i] = T(b1) * m_[p][i] + T(1.0 - b1) * g[i];
                v_[p][i] = T(b2) * v_[p][i] + T(1.0 - b2) * g[i] * g[i];
                const double mhat = m_[p][i] / bc1;
                const double vhat = v_[p][i] / bc2;
                w[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
                if (weight_decay_ > 0.0) w[i] -= static_cast<T>(lr * weight_decay_ * w[i]);
            }
        }
    }

    void zero_grad() {
        for (NamedParam<T>& p : *params_) p.tensor.zero_grad();
    }

private:
    std::vector<NamedParam<T>>* params_;
    double weight_decay_ = 0.0;
    std::vector<std::vector<T>> m_, v_;
    std::size_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

// Preprocessed split: patch rows ready for the model's projection layer.
struct TokenDataset {
    std::size_t count = 0;
    std::size_t seq_len = 0;
    std::size_t patch_dim = 0;
    std::vector<double> patches;  // count x seq_len x patch_dim
    std::vector<std::size_t> labels;

    Tensor<double> batch(const std::vector<std::size_t>& idx) const;
    std::vector<std::size_t> batch_labels(const std::vector<std::size_t>& idx) const;
};

// Decode + featurize one split of the manifest. Standardizer must come from
// the training split; pass the same one for every split of a run.
TokenDataset build_dataset(const DatasetManifest& manifest,
                           const std::vector<std::size_t>& rows, const FrontendConfig& cfg,
                           const Standardizer& stats);

// Mean/std over the training rows' log-mel features.
Standardizer fit_standardizer(const DatasetManifest& manifest,
                              const std::vector<std::size_t>& rows,
                              const FrontendConfig& cfg);

// Forward the whole split in batches (no tape) and score it.
MetricsReport evaluate(const MixerModel<double>& model, const TokenDataset& data,
                       const std::string& split, std::size_t epoch,
                       std::size_t batch_size = 64);

struct TrainResult {
    std::vector<MetricsReport> history;  // epoch-major: train, then val/test if present
    std::size_t best_epoch = 0;
    MetricsReport best_report;           // on the selection split
    std::vector<std::vector<double>> best_params;  // snapshot, parameter order
};

using ReportSink = std::function<void(const MetricsReport&)>;

// Epoch loop: seeded shuffle, Adam with the lr_at schedule, per-epoch metrics
// for every provided split. Selection prefers the val split (ACC, then AUC);
// without a val split it falls back to the train metrics. The model is left
// at the best-epoch parameters.
TrainResult train_model(MixerModel<double>& model, const TokenDataset& train_set,
                        const TokenDataset* val_set, const TokenDataset* test_set,
                        const TrainConfig& cfg, const ReportSink& sink = {});

// Repeated Adam steps over one fixed batch; returns the loss after each step.
// Used by overfitting sanity checks.
std::vector<double> train_steps(MixerModel<double>& model, const TokenDataset& data,
                                std::size_t steps, double lr);

struct FoldReport {
    std::string fold;
    MetricsReport held_out;
};

struct KFoldSummary {
    std::vector<FoldReport> folds;
    double mean_acc = 0.0;
    double best_acc = 0.0;
    double mean_auc = 0.0;
};

// One model per fold; fold f is held out for evaluation and the rest train.
// Standardizer and model are rebuilt per fold from that fold's training rows.
KFoldSummary kfold(const DatasetManifest& manifest, const FrontendConfig& fcfg,
                   const ModelConfig& mcfg, const TrainConfig& tcfg,
                   const ReportSink& sink = {},
                   const std::function<void(const std::string&, MixerModel<double>&)>&
                       on_fold_model = {});

}  // namespace asmrh
