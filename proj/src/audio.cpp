#include "asmrh/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "asmrh/spectral.hpp"

namespace asmrh {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

void FrontendConfig::validate() const {
    if (sample_rate == 0) throw ConfigError("FrontendConfig: sample_rate must be positive");
    if (window_len == 0 || hop_len == 0)
        throw ConfigError(msg("FrontendConfig: window_len = ", window_len, " and hop_len = ",
                              hop_len, " must be positive"));
    if (n_fft < window_len)
        throw ConfigError(msg("FrontendConfig: n_fft = ", n_fft,
                              " must be >= window_len = ", window_len));
    if (mel_bins == 0) throw ConfigError("FrontendConfig: mel_bins must be positive");
    if (!(fmin >= 0.0) || !(fmin < fmax))
        throw ConfigError(msg("FrontendConfig: need 0 <= fmin < fmax, got fmin = ", fmin,
                              ", fmax = ", fmax));
    if (fmax > static_cast<double>(sample_rate) / 2.0)
        throw ConfigError(msg("FrontendConfig: fmax = ", fmax,
                              " exceeds Nyquist = ", sample_rate / 2.0));
    if (target_frames == 0) throw ConfigError("FrontendConfig: target_frames must be positive");
    if (patch_t == 0 || target_frames % patch_t != 0)
        throw ConfigError(msg("FrontendConfig: patch_t = ", patch_t,
                              " must divide target_frames = ", target_frames));
    if (patch_f == 0 || mel_bins % patch_f != 0)
        throw ConfigError(msg("FrontendConfig: patch_f = ", patch_f,
                              " must divide mel_bins = ", mel_bins));
    const std::size_t s = (target_frames / patch_t) * (mel_bins / patch_f);
    if (s != seq_len)
        throw ConfigError(msg("FrontendConfig: (T_fixed/patch_t)*(F/patch_f) = ", s,
                              " does not equal seq_len = ", seq_len));
    if (embed_dim == 0) throw ConfigError("FrontendConfig: embed_dim must be positive");
}

AudioClip load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(msg("load_wav: cannot open '", path.string(), "'"));

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw FormatError(msg("load_wav: '", path.string(), "' is not a RIFF file"));
    read_u32(in);  // riff payload size, unused
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw FormatError(msg("load_wav: '", path.string(), "' is not a WAVE file"));

    std::uint16_t codec = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<char> data;
    bool have_data = false;

    while (in) {
        in.read(tag, 4);
        if (!in) break;
        const std::uint32_t size = read_u32(in);
        if (!in) throw FormatError(msg("load_wav: truncated chunk header in '", path.string(), "'"));
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16)
                throw FormatError(msg("load_wav: fmt chunk too small in '", path.string(), "'"));
            codec = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            in.seekg(size - 16 + (size & 1), std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(size);
            in.read(data.data(), static_cast<std::streamsize>(size));
            if (static_cast<std::uint32_t>(in.gcount()) != size)
                throw FormatError(msg("load_wav: truncated data chunk in '", path.string(), "'"));
            if (size & 1) in.seekg(1, std::ios::cur);
            have_data = true;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data)
        throw FormatError(msg("load_wav: missing fmt or data chunk in '", path.string(), "'"));
    if (channels == 0 || rate == 0)
        throw FormatError(msg("load_wav: invalid fmt fields in '", path.string(), "'"));

    const bool pcm16 = codec == 1 && bits == 16;
    const bool float32 = codec == 3 && bits == 32;
    if (!pcm16 && !float32)
        throw FormatError(msg("load_wav: unsupported codec tag ", codec, " with ", bits,
                              "-bit samples in '", path.string(),
                              "' (PCM16 and FLOAT32 only)"));

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t num_frames = data.size() / frame_bytes;

    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.resize(num_frames);
    for (std::size_t i = 0; i < num_frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const char* p = data.data() + i * frame_bytes + c * bytes_per_sample;
            if (pcm16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                acc += static_cast<double>(v);
            }
        }
        clip.samples[i] = acc / channels;
    }
    return clip;
}

void save_wav_pcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                    std::size_t sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(msg("save_wav_pcm16: cannot open '", path.string(), "'"));
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<std::uint32_t>(sample_rate));
    write_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, data_bytes);
    for (double s : samples) {
        const double scaled = std::round(s * 32768.0);
        const std::int16_t v = static_cast<std::int16_t>(
            std::clamp(scaled, -32768.0, 32767.0));
        write_u16(out, static_cast<std::uint16_t>(v));
    }
    if (!out) throw DataError(msg("save_wav_pcm16: write failed for '", path.string(), "'"));
}

AudioClip resample_linear(const AudioClip& clip, std::size_t target_rate) {
    if (clip.sample_rate == 0) throw DataError("resample_linear: clip has no sample rate");
    if (clip.sample_rate == target_rate || clip.samples.empty()) {
        AudioClip out = clip;
        out.sample_rate = target_rate;
        return out;
    }
    const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
    const std::size_t n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(clip.samples.size()) / ratio));
    AudioClip out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out);
    const std::size_t last = clip.samples.size() - 1;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double pos = i * ratio;
        const std::size_t i0 = std::min(static_cast<std::size_t>(pos), last);
        const std::size_t i1 = std::min(i0 + 1, last);
        const double frac = pos - static_cast<double>(i0);
        out.samples[i] = clip.samples[i0] * (1.0 - frac) + clip.samples[i1] * frac;
    }
    return out;
}

std::vector<std::complex<double>> stft(const AudioClip& clip, const FrontendConfig& cfg,
                                       std::size_t& frames_out) {
    cfg.validate();
    const std::size_t len = clip.samples.size();
    const std::size_t pad = cfg.window_len / 2;
    if (len < pad + 1)
        throw DataError(msg("stft: clip of ", len, " samples is too short; need more than ",
                            pad, " for a ", cfg.window_len, "-sample window"));
    const std::size_t padded = len + 2 * pad;
    const std::size_t T = 1 + (padded - cfg.window_len) / cfg.hop_len;
    const std::size_t m = cfg.n_fft / 2 + 1;

    std::vector<double> window(cfg.window_len);
    for (std::size_t i = 0; i < cfg.window_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.window_len);

    auto sample_at = [&](std::size_t idx) {
        const long j = static_cast<long>(idx) - static_cast<long>(pad);
        if (j < 0) return clip.samples[static_cast<std::size_t>(-j)];
        if (j >= static_cast<long>(len))
            return clip.samples[2 * (len - 1) - static_cast<std::size_t>(j)];
        return clip.samples[static_cast<std::size_t>(j)];
    };

    std::vector<std::complex<double>> out(T * m);
    std::vector<double> seg(cfg.n_fft);
    for (std::size_t t = 0; t < T; ++t) {
        std::fill(seg.begin(), seg.end(), 0.0);
        const std::size_t start = t * cfg.hop_len;
        for (std::size_t i = 0; i < cfg.window_len; ++i)
            seg[i] = window[i] * sample_at(start + i);
        const std::vector<std::complex<double>> bins = spectral::rfft(seg);
        std::copy(bins.begin(), bins.end(), out.begin() + t * m);
    }
    frames_out = T;
    return out;
}

std::vector<double> mel_filterbank(const FrontendConfig& cfg) {
    cfg.validate();
    const std::size_t m = cfg.n_fft / 2 + 1;
    const std::size_t F = cfg.mel_bins;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);

    std::vector<double> edges(F + 2);
    for (std::size_t j = 0; j < F + 2; ++j)
        edges[j] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * j / (F + 1));

    std::vector<double> bank(F * m, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
        const double lo = edges[f], mid = edges[f + 1], hi = edges[f + 2];
        double row_sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double freq = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
            double w = 0.0;
            if (freq >= lo && freq <= mid && mid > lo)
                w = (freq - lo) / (mid - lo);
            else if (freq > mid && freq <= hi && hi > mid)
                w = (hi - freq) / (hi - mid);
            bank[f * m + k] = w;
            row_sum += w;
        }
        if (!(row_sum > 0.0))
            throw ConfigError(msg("mel_filterbank: filter ", f, " (", lo, " .. ", hi,
                                  " Hz) covers no FFT bin; reduce mel_bins or raise n_fft"));
    }
    return bank;
}

MelSpec mel_project(const std::vector<std::complex<double>>& frames, std::size_t num_frames,
                    const FrontendConfig& cfg) {
    const std::size_t m = cfg.n_fft / 2 + 1;
    if (frames.size() != num_frames * m)
        throw ShapeError(msg("mel_project: frame buffer of ", frames.size(),
                             " values does not match ", num_frames, " x ", m));
    const std::vector<double> bank = mel_filterbank(cfg);
    MelSpec mel;
    mel.frames = num_frames;
    mel.mel_bins = cfg.mel_bins;
    mel.values.resize(num_frames * cfg.mel_bins);
    std::vector<double> power(m);
    for (std::size_t t = 0; t < num_frames; ++t) {
        for (std::size_t k = 0; k < m; ++k) power[k] = std::norm(frames[t * m + k]);
        for (std::size_t f = 0; f < cfg.mel_bins; ++f) {
            double acc = 0.0;
            const double* row = bank.data() + f * m;
            for (std::size_t k = 0; k < m; ++k) acc += row[k] * power[k];
            mel.at(t, f) = std::log(acc + 1e-6);
        }
    }
    return mel;
}

MelSpec frontend_features(const AudioClip& clip, const FrontendConfig& cfg) {
    cfg.validate();
    const AudioClip resampled =
        clip.sample_rate == cfg.sample_rate ? clip : resample_linear(clip, cfg.sample_rate);
    std::size_t frames = 0;
    const std::vector<std::complex<double>> spec = stft(resampled, cfg, frames);
    return mel_project(spec, frames, cfg);
}

Standardizer compute_standardizer(const std::vector<MelSpec>& train_feats) {
    std::size_t count = 0;
    double mean = 0.0;
    for (const MelSpec& mel : train_feats) {
        for (double v : mel.values) mean += v;
        count += mel.values.size();
    }
    if (count == 0) throw DataError("compute_standardizer: no training features");
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (const MelSpec& mel : train_feats)
        for (double v : mel.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(count);
    Standardizer s;
    s.mean = mean;
    s.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
    return s;
}

void standardize(MelSpec& mel, const Standardizer& stats) {
    if (mel.normalized)
        throw Error("standardize: MelSpec was already standardized (idempotence guard)");
    for (double& v : mel.values) v = (v - stats.mean) / stats.stddev;
    mel.normalized = true;
}

MelSpec fix_length(const MelSpec& mel, std::size_t t_fixed) {
    if (t_fixed == 0) throw ConfigError("fix_length: T_fixed must be positive");
    MelSpec out;
    out.mel_bins = mel.mel_bins;
    out.frames = t_fixed;
    out.normalized = mel.normalized;
    out.values.assign(t_fixed * mel.mel_bins, 0.0);
    const std::size_t keep = std::min(mel.frames, t_fixed);
    std::copy(mel.values.begin(),
              mel.values.begin() + static_cast<std::ptrdiff_t>(keep * mel.mel_bins),
              out.values.begin());
    return out;
}

std::vector<double> patch_slices(const MelSpec& fixed, const FrontendConfig& cfg) {
    cfg.validate();
    if (fixed.frames != cfg.target_frames || fixed.mel_bins != cfg.mel_bins)
        throw ShapeError(msg("patch_slices: MelSpec is ", fixed.frames, " x ", fixed.mel_bins,
                             ", config expects ", cfg.target_frames, " x ", cfg.mel_bins));
    const std::size_t nt = cfg.target_frames / cfg.patch_t;
    const std::size_t nf = cfg.mel_bins / cfg.patch_f;
    const std::size_t P = cfg.patch_dim();
    std::vector<double> out(cfg.seq_len * P);
    for (std::size_t pf = 0; pf < nf; ++pf)
        for (std::size_t pt = 0; pt < nt; ++pt) {
            const std::size_t s = pf * nt + pt;  // time patch index varies fastest
            double* token = out.data() + s * P;
            for (std::size_t dt = 0; dt < cfg.patch_t; ++dt)
                for (std::size_t df = 0; df < cfg.patch_f; ++df)
                    token[dt * cfg.patch_f + df] =
                        fixed.at(pt * cfg.patch_t + dt, pf * cfg.patch_f + df);
        }
    return out;
}

std::vector<double> patch_embed(const MelSpec& fixed, const std::vector<double>& weight,
                                const std::vector<double>& bias, const FrontendConfig& cfg) {
    const std::size_t P = cfg.patch_dim();
    const std::size_t D = cfg.embed_dim;
    if (weight.size() != P * D)
        throw ShapeError(msg("patch_embed: weight has ", weight.size(), " values, expected ",
                             P, " x ", D));
    if (bias.size() != D)
        throw ShapeError(msg("patch_embed: bias has ", bias.size(), " values, expected ", D));
    const std::vector<double> slices = patch_slices(fixed, cfg);
    std::vector<double> out(cfg.seq_len * D, 0.0);
    for (std::size_t s = 0; s < cfg.seq_len; ++s) {
        const double* row = slices.data() + s * P;
        double* dst = out.data() + s * D;
        for (std::size_t p = 0; p < P; ++p) {
            const double x = row[p];
            const double* w = weight.data() + p * D;
            for (std::size_t d = 0; d < D; ++d) dst[d] += x * w[d];
        }
        for (std::size_t d = 0; d < D; ++d) dst[d] += bias[d];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

bool valid_split(const std::string& s) {
    if (s == "train" || s == "val" || s == "test") return true;
    if (s.size() == 5 && s.rfind("fold", 0) == 0 && s[4] >= '0' && s[4] <= '9') return true;
    return false;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw DataError(msg("load_manifest: cannot open '", csv_path.string(), "'"));
    const std::filesystem::path root = csv_path.parent_path();

    std::string line;
    if (!std::getline(in, line))
        throw DataError(msg("load_manifest: '", csv_path.string(), "' is empty"));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "path,label,split")
        throw DataError(msg("load_manifest: row 1: header must be 'path,label,split', got '",
                            line, "'"));

    DatasetManifest manifest;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                                       : line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos ||
            line.find(',', c2 + 1) != std::string::npos)
            throw DataError(msg("load_manifest: row ", row, ": expected 3 fields, got '",
                                line, "'"));
        const std::string path_field = line.substr(0, c1);
        const std::string label_field = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string split_field = line.substr(c2 + 1);
        if (path_field.empty())
            throw DataError(msg("load_manifest: row ", row, ": empty path"));

        ManifestEntry entry;
        std::filesystem::path p(path_field);
        entry.path = p.is_absolute() ? p : root / p;
        try {
            std::size_t used = 0;
            entry.label = std::stol(label_field, &used);
            if (used != label_field.size()) throw std::invalid_argument(label_field);
        } catch (const std::exception&) {
            throw DataError(msg("load_manifest: row ", row, ": label '", label_field,
                                "' is not an integer"));
        }
        if (entry.label < 0)
            throw DataError(msg("load_manifest: row ", row, ": label ", entry.label,
                                " is negative"));
        if (!valid_split(split_field))
            throw DataError(msg("load_manifest: row ", row, ": split '", split_field,
                                "' is not train/val/test or fold0..fold9"));
        entry.split = split_field;
        manifest.entries.push_back(std::move(entry));
    }
    if (manifest.entries.empty())
        throw DataError(msg("load_manifest: '", csv_path.string(), "' has no data rows"));
    return manifest;
}

std::vector<std::size_t> DatasetManifest::indices_for_split(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].split == split) out.push_back(i);
    return out;
}

std::size_t DatasetManifest::num_classes() const {
    long max_label = -1;
    for (const ManifestEntry& e : entries) max_label = std::max(max_label, e.label);
    return static_cast<std::size_t>(max_label + 1);
}

bool DatasetManifest::has_split(const std::string& split) const {
    for (const ManifestEntry& e : entries)
        if (e.split == split) return true;
    return false;
}

std::vector<std::string> DatasetManifest::folds() const {
    std::set<std::string> seen;
    for (const ManifestEntry& e : entries)
        if (e.split.rfind("fold", 0) == 0) seen.insert(e.split);
    return std::vector<std::string>(seen.begin(), seen.end());
}

}  // namespace asmrh
