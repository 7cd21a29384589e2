#pragma once

#include <filesystem>
#include <string>

#include "asmrh/audio.hpp"
#include "asmrh/checkpoint.hpp"
#include "asmrh/mixer.hpp"
#include "asmrh/train.hpp"

namespace asmrh {

// The run-level document: sections `frontend`, `model`, `train`. Parsing is
// strict (unknown keys rejected); absent keys keep their defaults. The
// model's seq_len/embed_dim mirror the frontend geometry and may be omitted;
// model.num_classes may be 0, meaning "take it from the manifest".
struct RunConfig {
    FrontendConfig frontend;
    ModelConfig model;
    TrainConfig train;

    void validate(bool require_classes = true) const;
    std::string canonical_json() const;  // sorted keys, round-trip stable
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Model + config -> checkpoint (config blob is the canonical run JSON).
// The dataset standardizer rides along as two scalar records so eval and
// infer reuse the training-split statistics.
Checkpoint make_checkpoint(const RunConfig& cfg, const MixerModel<double>& model,
                           const Standardizer* stats = nullptr);

// Parse the blob stored in a checkpoint.
RunConfig run_config_from_checkpoint(const Checkpoint& ckpt);

// Stored training-split statistics; identity (0, 1) when absent.
Standardizer standardizer_from_checkpoint(const Checkpoint& ckpt);

// IncompatibleError naming every differing field.
void require_same_model(const RunConfig& stored, const RunConfig& wanted);

// Install checkpoint arrays into a freshly built model; IncompatibleError on
// missing/mismatched records, FormatError on malformed payloads.
void apply_checkpoint(const Checkpoint& ckpt, MixerModel<double>& model);

}  // namespace asmrh
