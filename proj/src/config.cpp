#include "asmrh/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace asmrh {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& section) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(msg("config: unknown key '", it.key(), "' in section '",
                                  section, "'"));
}

template <typename U>
void read_field(const json& j, const char* key, U& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<U>();
    } catch (const json::exception& e) {
        throw ConfigError(msg("config: bad value for '", section, ".", key, "': ", e.what()));
    }
}

json frontend_to_json(const FrontendConfig& f) {
    json j;
    j["sample_rate"] = f.sample_rate;
    j["window_len"] = f.window_len;
    j["hop_len"] = f.hop_len;
    j["n_fft"] = f.n_fft;
    j["mel_bins"] = f.mel_bins;
    j["fmin"] = f.fmin;
    j["fmax"] = f.fmax;
    j["target_frames"] = f.target_frames;
    j["patch_t"] = f.patch_t;
    j["patch_f"] = f.patch_f;
    j["embed_dim"] = f.embed_dim;
    j["seq_len"] = f.seq_len;
    return j;
}

json model_to_json(const ModelConfig& m) {
    json j;
    j["seq_len"] = m.seq_len;
    j["embed_dim"] = m.embed_dim;
    j["depth"] = m.depth;
    j["ff_expansion_channel"] = m.ff_expansion_channel;
    j["ff_expansion_token"] = m.ff_expansion_token;
    j["num_classes"] = m.num_classes;
    j["variant"] = variant_name(m.variant);
    j["roll_channel_folds"] = m.roll_channel_folds;
    j["roll_height_folds"] = m.roll_height_folds;
    return j;
}

json train_to_json(const TrainConfig& t) {
    json j;
    j["lr0"] = t.lr0;
    j["decay_start_epoch"] = t.decay_start_epoch;
    j["decay_factor"] = t.decay_factor;
    j["epochs"] = t.epochs;
    j["batch_size"] = t.batch_size;
    j["seed"] = t.seed;
    j["weight_decay"] = t.weight_decay;
    return j;
}

}  // namespace

void RunConfig::validate(bool require_classes) const {
    frontend.validate();
    if (require_classes) model.validate();
    train.validate();
    if (model.seq_len != frontend.seq_len)
        throw ConfigError(msg("config: model.seq_len = ", model.seq_len,
                              " does not match frontend.seq_len = ", frontend.seq_len));
    if (model.embed_dim != frontend.embed_dim)
        throw ConfigError(msg("config: model.embed_dim = ", model.embed_dim,
                              " does not match frontend.embed_dim = ", frontend.embed_dim));
}

std::string RunConfig::canonical_json() const {
    json j;
    j["frontend"] = frontend_to_json(frontend);
    j["model"] = model_to_json(model);
    j["train"] = train_to_json(train);
    return j.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(msg("config: JSON parse failure: ", e.what()));
    }
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    reject_unknown(j, {"frontend", "model", "train"}, "<top>");

    RunConfig cfg;
    // model geometry defaults to the frontend geometry below
    bool model_seq_set = false, model_dim_set = false;

    if (j.contains("frontend")) {
        const json& f = j["frontend"];
        if (!f.is_object()) throw ConfigError("config: 'frontend' must be an object");
        reject_unknown(f,
                       {"sample_rate", "window_len", "hop_len", "n_fft", "mel_bins", "fmin",
                        "fmax", "target_frames", "patch_t", "patch_f", "embed_dim", "seq_len"},
                       "frontend");
        read_field(f, "sample_rate", cfg.frontend.sample_rate, "frontend");
        read_field(f, "window_len", cfg.frontend.window_len, "frontend");
        read_field(f, "hop_len", cfg.frontend.hop_len, "frontend");
        read_field(f, "n_fft", cfg.frontend.n_fft, "frontend");
        read_field(f, "mel_bins", cfg.frontend.mel_bins, "frontend");
        read_field(f, "fmin", cfg.frontend.fmin, "frontend");
        read_field(f, "fmax", cfg.frontend.fmax, "frontend");
        read_field(f, "target_frames", cfg.frontend.target_frames, "frontend");
        read_field(f, "patch_t", cfg.frontend.patch_t, "frontend");
        read_field(f, "patch_f", cfg.frontend.patch_f, "frontend");
        read_field(f, "embed_dim", cfg.frontend.embed_dim, "frontend");
        read_field(f, "seq_len", cfg.frontend.seq_len, "frontend");
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        if (!m.is_object()) throw ConfigError("config: 'model' must be an object");
        reject_unknown(m,
                       {"seq_len", "embed_dim", "depth", "ff_expansion_channel",
                        "ff_expansion_token", "num_classes", "variant", "roll_channel_folds",
                        "roll_height_folds"},
                       "model");
        model_seq_set = m.contains("seq_len");
        model_dim_set = m.contains("embed_dim");
        read_field(m, "seq_len", cfg.model.seq_len, "model");
        read_field(m, "embed_dim", cfg.model.embed_dim, "model");
        read_field(m, "depth", cfg.model.depth, "model");
        read_field(m, "ff_expansion_channel", cfg.model.ff_expansion_channel, "model");
        read_field(m, "ff_expansion_token", cfg.model.ff_expansion_token, "model");
        read_field(m, "num_classes", cfg.model.num_classes, "model");
        if (m.contains("variant")) {
            std::string v;
            read_field(m, "variant", v, "model");
            cfg.model.variant = variant_from_string(v);
        }
        read_field(m, "roll_channel_folds", cfg.model.roll_channel_folds, "model");
        read_field(m, "roll_height_folds", cfg.model.roll_height_folds, "model");
    }
    if (!model_seq_set) cfg.model.seq_len = cfg.frontend.seq_len;
    if (!model_dim_set) cfg.model.embed_dim = cfg.frontend.embed_dim;

    if (j.contains("train")) {
        const json& t = j["train"];
        if (!t.is_object()) throw ConfigError("config: 'train' must be an object");
        reject_unknown(t,
                       {"lr0", "decay_start_epoch", "decay_factor", "epochs", "batch_size",
                        "seed", "weight_decay"},
                       "train");
        read_field(t, "lr0", cfg.train.lr0, "train");
        read_field(t, "decay_start_epoch", cfg.train.decay_start_epoch, "train");
        read_field(t, "decay_factor", cfg.train.decay_factor, "train");
        read_field(t, "epochs", cfg.train.epochs, "train");
        read_field(t, "batch_size", cfg.train.batch_size, "train");
        read_field(t, "seed", cfg.train.seed, "train");
        read_field(t, "weight_decay", cfg.train.weight_decay, "train");
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(msg("config: cannot open '", path.string(), "'"));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

Checkpoint make_checkpoint(const RunConfig& cfg, const MixerModel<double>& model,
                           const Standardizer* stats) {
    Checkpoint ckpt;
    ckpt.config_blob = cfg.canonical_json();
    for (const NamedParam<double>& p : model.parameters()) {
        std::vector<std::uint64_t> extents(p.tensor.shape().begin(), p.tensor.shape().end());
        ckpt.records.push_back(make_record_f64(p.name, extents, p.tensor.data()));
    }
    if (stats) {
        ckpt.records.push_back(make_record_f64("stats.mean", {}, &stats->mean));
        ckpt.records.push_back(make_record_f64("stats.stddev", {}, &stats->stddev));
    }
    return ckpt;
}

RunConfig run_config_from_checkpoint(const Checkpoint& ckpt) {
    return parse_run_config(ckpt.config_blob);
}

Standardizer standardizer_from_checkpoint(const Checkpoint& ckpt) {
    Standardizer s;
    if (const CheckpointRecord* mean = ckpt.find("stats.mean")) s.mean = mean->as_f64()[0];
    if (const CheckpointRecord* sd = ckpt.find("stats.stddev")) s.stddev = sd->as_f64()[0];
    return s;
}

void require_same_model(const RunConfig& stored, const RunConfig& wanted) {
    std::vector<std::string> diffs;
    auto check = [&](const char* field, auto a, auto b) {
        if (a != b) {
            std::ostringstream os;
            os << field << " (" << a << " vs " << b << ")";
            diffs.push_back(os.str());
        }
    };
    check("model.seq_len", stored.model.seq_len, wanted.model.seq_len);
    check("model.embed_dim", stored.model.embed_dim, wanted.model.embed_dim);
    check("model.depth", stored.model.depth, wanted.model.depth);
    check("model.ff_expansion_channel", stored.model.ff_expansion_channel,
          wanted.model.ff_expansion_channel);
    check("model.ff_expansion_token", stored.model.ff_expansion_token,
          wanted.model.ff_expansion_token);
    check("model.num_classes", stored.model.num_classes, wanted.model.num_classes);
    check("model.variant", std::string(variant_name(stored.model.variant)),
          std::string(variant_name(wanted.model.variant)));
    check("model.roll_channel_folds", stored.model.roll_channel_folds,
          wanted.model.roll_channel_folds);
    check("model.roll_height_folds", stored.model.roll_height_folds,
          wanted.model.roll_height_folds);
    if (!diffs.empty()) {
        std::string joined;
        for (std::size_t i = 0; i < diffs.size(); ++i)
            joined += (i ? ", " : "") + diffs[i];
        throw IncompatibleError(msg("checkpoint does not match requested model: ", joined));
    }
}

void apply_checkpoint(const Checkpoint& ckpt, MixerModel<double>& model) {
    for (NamedParam<double>& p : model.parameters()) {
        const CheckpointRecord* rec = ckpt.find(p.name);
        if (!rec)
            throw IncompatibleError(msg("checkpoint is missing parameter '", p.name, "'"));
        const std::vector<std::size_t> shape(rec->extents.begin(), rec->extents.end());
        if (shape != p.tensor.shape())
            throw IncompatibleError(msg("checkpoint parameter '", p.name, "' has shape ",
                                        shape_str(shape), ", model expects ",
                                        shape_str(p.tensor.shape())));
        const std::vector<double> vals = rec->as_f64();
        std::copy(vals.begin(), vals.end(), p.tensor.data());
    }
}

}  // namespace asmrh
