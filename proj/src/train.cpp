#include "asmrh/train.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

namespace asmrh {

Tensor<double> TokenDataset::batch(const std::vector<std::size_t>& idx) const {
    std::vector<double> buf(idx.size() * seq_len * patch_dim);
    const std::size_t row = seq_len * patch_dim;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= count) throw Error(msg("batch: index ", idx[i], " out of range"));
        std::copy(patches.begin() + static_cast<std::ptrdiff_t>(idx[i] * row),
                  patches.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * row),
                  buf.begin() + static_cast<std::ptrdiff_t>(i * row));
    }
    return Tensor<double>::from_data({idx.size(), seq_len, patch_dim}, std::move(buf));
}

std::vector<std::size_t> TokenDataset::batch_labels(const std::vector<std::size_t>& idx) const {
    std::vector<std::size_t> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

Standardizer fit_standardizer(const DatasetManifest& manifest,
                              const std::vector<std::size_t>& rows,
                              const FrontendConfig& cfg) {
    if (rows.empty()) throw DataError("fit_standardizer: no training rows");
    std::vector<MelSpec> feats;
    feats.reserve(rows.size());
    for (std::size_t r : rows)
        feats.push_back(frontend_features(load_wav(manifest.entries[r].path), cfg));
    return compute_standardizer(feats);
}

TokenDataset build_dataset(const DatasetManifest& manifest,
                           const std::vector<std::size_t>& rows, const FrontendConfig& cfg,
                           const Standardizer& stats) {
    cfg.validate();
    TokenDataset data;
    data.seq_len = cfg.seq_len;
    data.patch_dim = cfg.patch_dim();
    data.count = rows.size();
    data.patches.reserve(rows.size() * cfg.seq_len * data.patch_dim);
    data.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        const ManifestEntry& entry = manifest.entries[r];
        MelSpec mel = frontend_features(load_wav(entry.path), cfg);
        standardize(mel, stats);
        const MelSpec fixed = fix_length(mel, cfg.target_frames);
        const std::vector<double> slices = patch_slices(fixed, cfg);
        data.patches.insert(data.patches.end(), slices.begin(), slices.end());
        data.labels.push_back(static_cast<std::size_t>(entry.label));
    }
    return data;
}

namespace {

MetricsReport score_split(const std::vector<double>& probs,
                          const std::vector<std::size_t>& labels, std::size_t k,
                          double mean_loss, const std::string& split, std::size_t epoch) {
    MetricsReport rep;
    rep.split = split;
    rep.epoch = epoch;
    rep.loss = mean_loss;
    rep.acc = accuracy(probs, k, labels);
    std::vector<std::size_t> excluded;
    rep.auc = macro_auc(probs, k, labels, &excluded);
    for (std::size_t c : excluded)
        std::cerr << "warning: split '" << split << "' lacks positives or negatives for class "
                  << c << "; class excluded from macro AUC\n";
    return rep;
}

bool better(const MetricsReport& a, const MetricsReport& b) {
    if (a.acc != b.acc) return a.acc > b.acc;
    return a.auc > b.auc;
}

}  // namespace

MetricsReport evaluate(const MixerModel<double>& model, const TokenDataset& data,
                       const std::string& split, std::size_t epoch, std::size_t batch_size) {
    if (data.count == 0) throw DataError(msg("evaluate: split '", split, "' is empty"));
    const std::size_t k = model.config().num_classes;
    std::vector<double> probs;
    probs.reserve(data.count * k);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < data.count; start += batch_size) {
        const std::size_t stop = std::min(data.count, start + batch_size);
        std::vector<std::size_t> idx(stop - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor<double> logits = model.forward_patches(data.batch(idx));
        const std::vector<std::size_t> lab = data.batch_labels(idx);
        loss_sum += cross_entropy(logits, lab).item() * static_cast<double>(idx.size());
        std::vector<double> s = logits.values();
        softmax_rows(s, k);
        probs.insert(probs.end(), s.begin(), s.end());
    }
    return score_split(probs, data.labels, k, loss_sum / static_cast<double>(data.count),
                       split, epoch);
}

TrainResult train_model(MixerModel<double>& model, const TokenDataset& train_set,
                        const TokenDataset* val_set, const TokenDataset* test_set,
                        const TrainConfig& cfg, const ReportSink& sink) {
    cfg.validate();
    if (train_set.count == 0) throw DataError("train: training split is empty");
    const std::size_t k = model.config().num_classes;

    std::vector<NamedParam<double>>& params = model.parameters();
    Adam<double> opt(params, cfg.weight_decay);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<std::size_t> order(train_set.count);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    bool have_best = false;
    auto emit = [&](const MetricsReport& rep) {
        result.history.push_back(rep);
        if (sink) sink(rep);
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::vector<double> probs;
        probs.reserve(train_set.count * k);
        std::vector<std::size_t> seen_labels;
        seen_labels.reserve(train_set.count);

        for (std::size_t start = 0; start < train_set.count; start += cfg.batch_size) {
            const std::size_t stop = std::min(train_set.count, start + cfg.batch_size);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(stop));
            const std::vector<std::size_t> lab = train_set.batch_labels(idx);

            Tape<double> tape;
            const Tensor<double> logits = model.forward_patches(train_set.batch(idx));
            const Tensor<double> loss = cross_entropy(logits, lab);
            tape.backward(loss);

            loss_sum += loss.item() * static_cast<double>(idx.size());
            std::vector<double> s = logits.values();
            softmax_rows(s, k);
            probs.insert(probs.end(), s.begin(), s.end());
            seen_labels.insert(seen_labels.end(), lab.begin(), lab.end());

            opt.step(lr);
            opt.zero_grad();
        }

        const MetricsReport train_rep =
            score_split(probs, seen_labels, k,
                        loss_sum / static_cast<double>(train_set.count), "train", epoch);
        emit(train_rep);

        MetricsReport val_rep;
        if (val_set && val_set->count > 0) {
            val_rep = evaluate(model, *val_set, "val", epoch);
            emit(val_rep);
        }
        if (test_set && test_set->count > 0) emit(evaluate(model, *test_set, "test", epoch));

        // best-model selection: validation metrics when available, else train
        const MetricsReport& sel = (val_set && val_set->count > 0) ? val_rep : train_rep;
        if (!have_best || better(sel, result.best_report)) {
            have_best = true;
            result.best_report = sel;
            result.best_epoch = epoch;
            result.best_params.clear();
            for (const NamedParam<double>& p : params)
                result.best_params.push_back(p.tensor.values());
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) {
        std::copy(result.best_params[i].begin(), result.best_params[i].end(),
                  params[i].tensor.data());
    }
    return result;
}

std::vector<double> train_steps(MixerModel<double>& model, const TokenDataset& data,
                                std::size_t steps, double lr) {
    if (data.count == 0) throw DataError("train_steps: empty dataset");
    std::vector<NamedParam<double>>& params = model.parameters();
    Adam<double> opt(params);
    std::vector<std::size_t> idx(data.count);
    std::iota(idx.begin(), idx.end(), 0);
    const Tensor<double> x = data.batch(idx);
    const std::vector<std::size_t> lab = data.batch_labels(idx);

    std::vector<double> losses;
    losses.reserve(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        Tape<double> tape;
        const Tensor<double> loss = cross_entropy(model.forward_patches(x), lab);
        tape.backward(loss);
        losses.push_back(loss.item());
        opt.step(lr);
        opt.zero_grad();
    }
    return losses;
}

KFoldSummary kfold(const DatasetManifest& manifest, const FrontendConfig& fcfg,
                   const ModelConfig& mcfg, const TrainConfig& tcfg, const ReportSink& sink,
                   const std::function<void(const std::string&, MixerModel<double>&)>&
                       on_fold_model) {
    const std::vector<std::string> folds = manifest.folds();
    if (folds.size() < 2)
        throw DataError(msg("kfold: manifest has ", folds.size(),
                            " fold labels; need at least 2"));
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
        if (manifest.entries[i].split.rfind("fold", 0) != 0)
            throw DataError(msg("kfold: row ", i + 2, " has split '",
                                manifest.entries[i].split, "', expected a fold label"));

    KFoldSummary summary;
    double acc_sum = 0.0, auc_sum = 0.0;
    for (const std::string& fold : folds) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i)
            (manifest.entries[i].split == fold ? test_rows : train_rows).push_back(i);
        if (train_rows.empty() || test_rows.empty())
            throw DataError(msg("kfold: fold '", fold, "' leaves an empty split"));

        const Standardizer stats = fit_standardizer(manifest, train_rows, fcfg);
        const TokenDataset train_set = build_dataset(manifest, train_rows, fcfg, stats);
        const TokenDataset test_set = build_dataset(manifest, test_rows, fcfg, stats);

        MixerModel<double> model(mcfg, fcfg.patch_dim(), tcfg.seed);
        ReportSink tagged;
        if (sink)
            tagged = [&](const MetricsReport& rep) {
                MetricsReport r = rep;
                r.split = fold + "/" + rep.split;
                sink(r);
            };
        train_model(model, train_set, nullptr, nullptr, tcfg, tagged);

        FoldReport fr;
        fr.fold = fold;
        fr.held_out = evaluate(model, test_set, fold, tcfg.epochs - 1);
        acc_sum += fr.held_out.acc;
        auc_sum += fr.held_out.auc;
        summary.best_acc = std::max(summary.best_acc, fr.held_out.acc);
        summary.folds.push_back(fr);
        if (on_fold_model) on_fold_model(fold, model);
    }
    summary.mean_acc = acc_sum / static_cast<double>(folds.size());
    summary.mean_auc = auc_sum / static_cast<double>(folds.size());
    return summary;
}

}  // namespace asmrh
