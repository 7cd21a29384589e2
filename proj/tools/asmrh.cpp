#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "asmrh/config.hpp"
#include "asmrh/selftest.hpp"
#include "asmrh/train.hpp"

namespace fs = std::filesystem;
using namespace asmrh;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string manifest_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string variant;
};

RunConfig resolve_config(const CommonOpts& opts, const DatasetManifest* manifest) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
    if (opts.seed) cfg.train.seed = *opts.seed;
    if (!opts.variant.empty()) cfg.model.variant = variant_from_string(opts.variant);
    if (cfg.model.num_classes == 0) {
        if (!manifest)
            throw ConfigError("config: model.num_classes is unset and no manifest is given");
        cfg.model.num_classes = manifest->num_classes();
    }
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(msg("cannot open '", path.string(), "' for writing"));
    out << text;
}

// one line per report: stdout and metrics.jsonl stay in lockstep
ReportSink file_and_stdout_sink(std::ofstream& jsonl) {
    return [&jsonl](const MetricsReport& rep) {
        const std::string line = rep.to_json();
        std::cout << line << "\n";
        jsonl << line << "\n";
        jsonl.flush();
    };
}

int cmd_train(const CommonOpts& opts) {
    const DatasetManifest manifest = load_manifest(opts.manifest_path);
    const RunConfig cfg = resolve_config(opts, &manifest);

    const std::vector<std::size_t> train_rows = manifest.indices_for_split("train");
    if (train_rows.empty())
        throw DataError(msg("manifest '", opts.manifest_path, "' has no train rows"));
    const std::vector<std::size_t> val_rows = manifest.indices_for_split("val");
    const std::vector<std::size_t> test_rows = manifest.indices_for_split("test");

    fs::create_directories(opts.out_dir);
    write_text(fs::path(opts.out_dir) / "effective-config.json", cfg.canonical_json());

    const Standardizer stats = fit_standardizer(manifest, train_rows, cfg.frontend);
    const TokenDataset train_set = build_dataset(manifest, train_rows, cfg.frontend, stats);
    TokenDataset val_set, test_set;
    if (!val_rows.empty()) val_set = build_dataset(manifest, val_rows, cfg.frontend, stats);
    if (!test_rows.empty()) test_set = build_dataset(manifest, test_rows, cfg.frontend, stats);

    MixerModel<double> model(cfg.model, cfg.frontend.patch_dim(), cfg.train.seed);

    std::ofstream jsonl(fs::path(opts.out_dir) / "metrics.jsonl", std::ios::trunc);
    if (!jsonl) throw DataError("cannot open metrics.jsonl for writing");
    const TrainResult result =
        train_model(model, train_set, val_rows.empty() ? nullptr : &val_set,
                    test_rows.empty() ? nullptr : &test_set, cfg.train,
                    file_and_stdout_sink(jsonl));

    checkpoint_save(fs::path(opts.out_dir) / "checkpoint.bin",
                    make_checkpoint(cfg, model, &stats));
    std::cout << "best epoch " << result.best_epoch << " on split '"
              << result.best_report.split << "': " << result.best_report.to_json() << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& split) {
    const Checkpoint ckpt = checkpoint_load(checkpoint_path);
    const RunConfig cfg = run_config_from_checkpoint(ckpt);
    cfg.validate();
    MixerModel<double> model(cfg.model, cfg.frontend.patch_dim(), 0);
    apply_checkpoint(ckpt, model);
    const Standardizer stats = standardizer_from_checkpoint(ckpt);

    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::vector<std::size_t> rows = manifest.indices_for_split(split);
    if (rows.empty())
        throw DataError(msg("manifest '", manifest_path, "' has no rows for split '", split,
                            "'"));
    const TokenDataset data = build_dataset(manifest, rows, cfg.frontend, stats);
    std::cout << evaluate(model, data, split, 0).to_json() << "\n";
    return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& wav_path) {
    const Checkpoint ckpt = checkpoint_load(checkpoint_path);
    const RunConfig cfg = run_config_from_checkpoint(ckpt);
    cfg.validate();
    MixerModel<double> model(cfg.model, cfg.frontend.patch_dim(), 0);
    apply_checkpoint(ckpt, model);
    const Standardizer stats = standardizer_from_checkpoint(ckpt);

    MelSpec mel = frontend_features(load_wav(wav_path), cfg.frontend);
    standardize(mel, stats);
    const MelSpec fixed = fix_length(mel, cfg.frontend.target_frames);
    std::vector<double> patches = patch_slices(fixed, cfg.frontend);

    const Tensor<double> x = Tensor<double>::from_data(
        {1, cfg.frontend.seq_len, cfg.frontend.patch_dim()}, std::move(patches));
    std::vector<double> scores = model.forward_patches(x).values();
    softmax_rows(scores, cfg.model.num_classes);

    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j)
        if (scores[j] > scores[best]) best = j;
    std::cout << "label " << best << "\nscores";
    std::cout.precision(17);
    for (double s : scores) std::cout << " " << s;
    std::cout << "\n";
    return 0;
}

int cmd_kfold(const CommonOpts& opts) {
    const DatasetManifest manifest = load_manifest(opts.manifest_path);
    const RunConfig cfg = resolve_config(opts, &manifest);

    fs::create_directories(opts.out_dir);
    write_text(fs::path(opts.out_dir) / "effective-config.json", cfg.canonical_json());

    std::ofstream jsonl(fs::path(opts.out_dir) / "metrics.jsonl", std::ios::trunc);
    if (!jsonl) throw DataError("cannot open metrics.jsonl for writing");

    const KFoldSummary summary = kfold(
        manifest, cfg.frontend, cfg.model, cfg.train, file_and_stdout_sink(jsonl),
        [&](const std::string& fold, MixerModel<double>& model) {
            checkpoint_save(fs::path(opts.out_dir) / ("checkpoint-" + fold + ".bin"),
                            make_checkpoint(cfg, model));
        });

    std::ostringstream table;
    table << "fold  acc  auc\n";
    for (const FoldReport& fr : summary.folds)
        table << fr.fold << "  " << fr.held_out.acc << "  " << fr.held_out.auc << "\n";
    table << "mean_acc " << summary.mean_acc << "\nbest_acc " << summary.best_acc
          << "\nmean_auc " << summary.mean_auc << "\n";
    std::cout << table.str();
    write_text(fs::path(opts.out_dir) / "summary.txt", table.str());
    return 0;
}

int cmd_selftest() {
    const std::vector<PropertyResult> results = run_selftest();
    print_selftest(std::cout, results);
    return selftest_ok(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASM-RH audio classifier: rolled time mixing + Hermitian frequency mixing"};
    app.require_subcommand(1);

    CommonOpts train_opts;
    CLI::App* train = app.add_subcommand("train", "train a model from a dataset manifest");
    train->add_option("--config", train_opts.config_path, "run config JSON");
    train->add_option("--manifest", train_opts.manifest_path, "dataset manifest CSV")
        ->required();
    train->add_option("--out", train_opts.out_dir, "output directory")->required();
    train->add_option("--seed", train_opts.seed, "override train.seed");
    train->add_option("--variant", train_opts.variant, "RH | H | R | baseline");

    std::string eval_checkpoint, eval_manifest, eval_split = "test";
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval->add_option("--manifest", eval_manifest, "dataset manifest CSV")->required();
    eval->add_option("--split", eval_split, "split name (default test)");

    std::string infer_checkpoint, infer_wav;
    CLI::App* infer = app.add_subcommand("infer", "classify one WAV file");
    infer->add_option("--checkpoint", infer_checkpoint, "checkpoint file")->required();
    infer->add_option("wav", infer_wav, "input WAV path")->required();

    CommonOpts kfold_opts;
    CLI::App* kf = app.add_subcommand("kfold", "cross-validate over manifest folds");
    kf->add_option("--config", kfold_opts.config_path, "run config JSON");
    kf->add_option("--manifest", kfold_opts.manifest_path, "dataset manifest CSV")
        ->required();
    kf->add_option("--out", kfold_opts.out_dir, "output directory")->required();
    kf->add_option("--seed", kfold_opts.seed, "override train.seed");
    kf->add_option("--variant", kfold_opts.variant, "RH | H | R | baseline");

    app.add_subcommand("selftest", "run the built-in oracle suite");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(train_opts);
        if (eval->parsed()) return cmd_eval(eval_checkpoint, eval_manifest, eval_split);
        if (infer->parsed()) return cmd_infer(infer_checkpoint, infer_wav);
        if (kf->parsed()) return cmd_kfold(kfold_opts);
        return cmd_selftest();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IncompatibleError& e) {
        std::cerr << "incompatible: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
