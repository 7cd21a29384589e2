#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asmrh/errors.hpp"

namespace asmrh {

// Mono audio; multi-channel input is averaged on ingest.
struct AudioClip {
    std::vector<double> samples;
    std::size_t sample_rate = 0;
};

// Log-compressed mel spectrogram, frames x mel_bins, row-major.
struct MelSpec {
    std::size_t frames = 0;
    std::size_t mel_bins = 0;
    std::vector<double> values;
    bool normalized = false;  // idempotence guard for standardization

    double& at(std::size_t t, std::size_t f) { return values[t * mel_bins + f]; }
    double at(std::size_t t, std::size_t f) const { return values[t * mel_bins + f]; }
};

struct FrontendConfig {
    std::size_t sample_rate = 16000;  // clips at other rates are linearly resampled
    std::size_t window_len = 400;     // samples (25 ms at 16 kHz)
    std::size_t hop_len = 160;        // samples (10 ms at 16 kHz)
    std::size_t n_fft = 512;
    std::size_t mel_bins = 128;       // F
    double fmin = 0.0;
    double fmax = 8000.0;
    std::size_t target_frames = 96;   // T_fixed
    std::size_t patch_t = 12;
    std::size_t patch_f = 16;
    std::size_t embed_dim = 64;       // D
    std::size_t seq_len = 64;         // S

    std::size_t patch_dim() const { return patch_t * patch_f; }
    void validate() const;  // throws ConfigError naming the violated field
};

// RIFF/WAVE decode; PCM 16-bit and IEEE float 32-bit only.
AudioClip load_wav(const std::filesystem::path& path);

// PCM16 writer used by dataset generators and tests; samples clamped to [-1, 1].
void save_wav_pcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                    std::size_t sample_rate);

// Linear-interpolation resample; returns the clip unchanged when rates match.
AudioClip resample_linear(const AudioClip& clip, std::size_t target_rate);

// Periodic Hann window STFT with reflection padding of window_len/2 on both
// sides; frame t bin k = rfft(zero-padded windowed segment)[k].
// Output is frames x (n_fft/2 + 1), row-major.
std::vector<std::complex<double>> stft(const AudioClip& clip, const FrontendConfig& cfg,
                                       std::size_t& frames_out);

// HTK mel triangular filterbank (mel = 2595 log10(1 + f/700)) applied to the
// power spectrum, then log(x + 1e-6).
MelSpec mel_project(const std::vector<std::complex<double>>& frames, std::size_t num_frames,
                    const FrontendConfig& cfg);

// Filterbank matrix F x (n_fft/2 + 1), row-major; exposed for oracle tests.
std::vector<double> mel_filterbank(const FrontendConfig& cfg);

// decode (+ resample) -> stft -> mel_project; standardization and fix_length
// are applied by the caller so dataset statistics stay a separate pass.
MelSpec frontend_features(const AudioClip& clip, const FrontendConfig& cfg);

// Scalar dataset statistics, computed on the training split only.
struct Standardizer {
    double mean = 0.0;
    double stddev = 1.0;
};

Standardizer compute_standardizer(const std::vector<MelSpec>& train_feats);

// (x - mean) / stddev in place; refuses to run twice on the same MelSpec.
void standardize(MelSpec& mel, const Standardizer& stats);

// Truncate or zero-pad trailing frames to exactly t_fixed. Runs after
// standardization so the padding rows are neutral.
MelSpec fix_length(const MelSpec& mel, std::size_t t_fixed);

// Non-overlapping patch_t x patch_f patches, flattened row-major (time within
// the patch first); token order has the time patch index varying fastest:
// s = pf * (T_fixed / patch_t) + pt. Output S x (patch_t * patch_f), row-major.
std::vector<double> patch_slices(const MelSpec& fixed, const FrontendConfig& cfg);

// patch_slices followed by the linear projection: out = slices * weight + bias,
// weight (patch_dim x D) row-major, bias (D). Output S x D row-major.
std::vector<double> patch_embed(const MelSpec& fixed, const std::vector<double>& weight,
                                const std::vector<double>& bias, const FrontendConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::filesystem::path path;  // resolved against the manifest's directory
    long label = 0;
    std::string split;  // train | val | test | fold0..fold9
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<std::size_t> indices_for_split(const std::string& split) const;
    std::size_t num_classes() const;  // max label + 1
    bool has_split(const std::string& split) const;
    std::vector<std::string> folds() const;  // sorted distinct fold names, if any
};

// UTF-8 CSV with exact header `path,label,split`; malformed rows raise
// DataError naming the 1-based row number.
DatasetManifest load_manifest(const std::filesystem::path& csv_path);

}  // namespace asmrh
