#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "asmrh/audio.hpp"
#include "asmrh/rng.hpp"

using namespace asmrh;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

fs::path tmp_dir() {
    const fs::path dir = fs::temp_directory_path() / "asmrh_audio_tests";
    fs::create_directories(dir);
    return dir;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

// hand-rolled writer so the loader is tested against independent bytes
void write_wav_raw(const fs::path& path, std::uint16_t codec, std::uint16_t channels,
                   std::uint32_t rate, std::uint16_t bits,
                   const std::vector<std::int16_t>& pcm) {
    std::ofstream out(path, std::ios::binary);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
    out.write("RIFF", 4);
    put_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(out, 16);
    put_u16(out, codec);
    put_u16(out, channels);
    put_u32(out, rate);
    put_u32(out, rate * channels * (bits / 8));
    put_u16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
    put_u16(out, bits);
    out.write("data", 4);
    put_u32(out, data_bytes);
    for (std::int16_t v : pcm) put_u16(out, static_cast<std::uint16_t>(v));
}

FrontendConfig desk_config() {
    FrontendConfig cfg;
    cfg.sample_rate = 16000;
    cfg.window_len = 400;
    cfg.hop_len = 160;
    cfg.n_fft = 512;
    cfg.mel_bins = 64;
    cfg.fmin = 0.0;
    cfg.fmax = 8000.0;
    cfg.target_frames = 96;
    cfg.patch_t = 12;
    cfg.patch_f = 16;
    cfg.embed_dim = 64;
    cfg.seq_len = 32;
    return cfg;
}

double hz_to_mel_ref(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz_ref(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

TEST_CASE("PCM16 full-scale square wave decodes to +-32767/32768") {
    const fs::path p = tmp_dir() / "square.wav";
    std::vector<std::int16_t> pcm;
    for (int i = 0; i < 64; ++i) pcm.push_back(i % 2 == 0 ? 32767 : -32767);
    write_wav_raw(p, 1, 1, 16000, 16, pcm);
    const AudioClip clip = load_wav(p);
    REQUIRE(clip.samples.size() == 64);
    CHECK(clip.sample_rate == 16000);
    for (std::size_t i = 0; i < 64; ++i) {
        const double want = (i % 2 == 0 ? 1.0 : -1.0) * 32767.0 / 32768.0;
        CHECK(clip.samples[i] == want);
    }
}

TEST_CASE("stereo channels x and -x average to silence") {
    const fs::path p = tmp_dir() / "cancel.wav";
    std::vector<std::int16_t> pcm;
    Rng rng(71);
    for (int i = 0; i < 50; ++i) {
        const std::int16_t v = static_cast<std::int16_t>(rng.index(30000)) ;
        pcm.push_back(v);
        pcm.push_back(static_cast<std::int16_t>(-v));
    }
    write_wav_raw(p, 1, 2, 8000, 16, pcm);
    const AudioClip clip = load_wav(p);
    REQUIRE(clip.samples.size() == 50);
    for (double s : clip.samples) CHECK(s == 0.0);
}

TEST_CASE("one second at 16 kHz is 16000 samples; float32 payload round-trips") {
    const fs::path p = tmp_dir() / "one_second.wav";
    std::vector<double> samples(16000);
    Rng rng(72);
    for (double& s : samples) s = rng.uniform(-0.9, 0.9);
    save_wav_pcm16(p, samples, 16000);
    const AudioClip clip = load_wav(p);
    CHECK(clip.samples.size() == 16000);
    for (std::size_t i = 0; i < samples.size(); ++i)
        CHECK(std::abs(clip.samples[i] - samples[i]) <= 0.5 / 32768.0);
}

TEST_CASE("unsupported codec is rejected naming the tag") {
    const fs::path p = tmp_dir() / "mulaw.wav";
    write_wav_raw(p, 7, 1, 8000, 16, std::vector<std::int16_t>(16, 0));
    CHECK_THROWS_WITH_AS(load_wav(p), doctest::Contains("codec tag 7"), FormatError);
}

TEST_CASE("missing file raises a data error with the path") {
    CHECK_THROWS_WITH_AS(load_wav("/nonexistent/nowhere.wav"),
                         doctest::Contains("nowhere.wav"), DataError);
}

TEST_CASE("linear resampling: constant stays constant, length rescales") {
    AudioClip clip;
    clip.sample_rate = 48000;
    clip.samples.assign(48000, 0.25);
    const AudioClip out = resample_linear(clip, 16000);
    CHECK(out.sample_rate == 16000);
    CHECK(out.samples.size() == 16000);
    for (double s : out.samples) CHECK(s == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("stft frame count and zero input") {
    FrontendConfig cfg = desk_config();
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(16000, 0.0);
    std::size_t frames = 0;
    const auto spec = stft(clip, cfg, frames);
    // padded length 16400 -> 1 + (16400 - 400) / 160
    CHECK(frames == 101);
    CHECK(spec.size() == frames * (cfg.n_fft / 2 + 1));
    for (const auto& v : spec) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("stft rejects clips shorter than the reflection pad") {
    FrontendConfig cfg = desk_config();
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(cfg.window_len / 2, 0.1);  // needs pad + 1
    std::size_t frames = 0;
    CHECK_THROWS_AS(stft(clip, cfg, frames), DataError);
}

TEST_CASE("stft Parseval: spectral energy equals windowed time energy") {
    FrontendConfig cfg = desk_config();
    Rng rng(73);
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(4000);
    for (double& s : clip.samples) s = rng.normal() * 0.1;

    std::size_t frames = 0;
    const auto spec = stft(clip, cfg, frames);
    const std::size_t m = cfg.n_fft / 2 + 1;

    // recompute the windowed segment of one inner frame directly
    std::vector<double> window(cfg.window_len);
    for (std::size_t i = 0; i < cfg.window_len; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.window_len);
    const std::size_t pad = cfg.window_len / 2;
    for (std::size_t t = 3; t < 6; ++t) {
        double time_energy = 0.0;
        for (std::size_t i = 0; i < cfg.window_len; ++i) {
            const long j = static_cast<long>(t * cfg.hop_len + i) - static_cast<long>(pad);
            const double s = window[i] * clip.samples[static_cast<std::size_t>(j)];
            time_energy += s * s;
        }
        double spec_energy = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double e = std::norm(spec[t * m + k]);
            const bool edge = k == 0 || (cfg.n_fft % 2 == 0 && k == cfg.n_fft / 2);
            spec_energy += (edge ? 1.0 : 2.0) * e;
        }
        spec_energy /= static_cast<double>(cfg.n_fft);
        CHECK(std::abs(spec_energy - time_energy) <= 1e-6 * std::max(1.0, time_energy));
    }
}

TEST_CASE("bin-center sine concentrates energy around its bin") {
    FrontendConfig cfg = desk_config();
    cfg.window_len = 512;  // window == n_fft: integer-bin Hann has a 3-bin spectrum
    cfg.hop_len = 160;
    const std::size_t k0 = 64;  // 2000 Hz at 16 kHz, n_fft 512
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(8000);
    for (std::size_t i = 0; i < clip.samples.size(); ++i)
        clip.samples[i] = std::sin(2.0 * kPi * k0 * i / cfg.n_fft);

    std::size_t frames = 0;
    const auto spec = stft(clip, cfg, frames);
    const std::size_t m = cfg.n_fft / 2 + 1;
    const std::size_t t = frames / 2;  // away from the reflected edges

    double total = 0.0, at_bin = 0.0, near_bin = 0.0;
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < m; ++k) {
        const double e = std::norm(spec[t * m + k]);
        total += e;
        if (k == k0) at_bin = e;
        if (k + 1 >= k0 && k <= k0 + 1) near_bin += e;
        if (e > std::norm(spec[t * m + argmax])) argmax = k;
    }
    CHECK(argmax == k0);
    CHECK(at_bin / total >= 0.60);   // exact-bin Hann puts 2/3 in the center
    CHECK(near_bin / total >= 0.99);
}

TEST_CASE("mel filterbank: positive row sums and direct-summation oracle") {
    FrontendConfig cfg = desk_config();
    const std::size_t m = cfg.n_fft / 2 + 1;
    const std::vector<double> bank = mel_filterbank(cfg);
    REQUIRE(bank.size() == cfg.mel_bins * m);
    for (std::size_t f = 0; f < cfg.mel_bins; ++f) {
        double row = 0.0;
        for (std::size_t k = 0; k < m; ++k) row += bank[f * m + k];
        CHECK(row > 0.0);
    }

    // independent filterbank: same HTK definition, rebuilt from scratch
    const double lo = hz_to_mel_ref(cfg.fmin), hi = hz_to_mel_ref(cfg.fmax);
    for (std::size_t f = 0; f < cfg.mel_bins; ++f) {
        const double e0 = mel_to_hz_ref(lo + (hi - lo) * f / (cfg.mel_bins + 1));
        const double e1 = mel_to_hz_ref(lo + (hi - lo) * (f + 1) / (cfg.mel_bins + 1));
        const double e2 = mel_to_hz_ref(lo + (hi - lo) * (f + 2) / (cfg.mel_bins + 1));
        for (std::size_t k = 0; k < m; ++k) {
            const double freq = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
            double w = 0.0;
            if (freq >= e0 && freq <= e1 && e1 > e0) w = (freq - e0) / (e1 - e0);
            else if (freq > e1 && freq <= e2 && e2 > e1) w = (e2 - freq) / (e2 - e1);
            CHECK(std::abs(bank[f * m + k] - w) <= 1e-12);
        }
    }

    // white noise through mel_project matches the direct filter sum
    Rng rng(74);
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(3000);
    for (double& s : clip.samples) s = rng.normal() * 0.2;
    std::size_t frames = 0;
    const auto spec = stft(clip, cfg, frames);
    const MelSpec mel = mel_project(spec, frames, cfg);
    for (std::size_t t = 0; t < frames; t += 7) {
        for (std::size_t f = 0; f < cfg.mel_bins; f += 5) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                acc += bank[f * m + k] * std::norm(spec[t * m + k]);
            CHECK(std::abs(mel.at(t, f) - std::log(acc + 1e-6)) <= 1e-10);
        }
    }
}

TEST_CASE("mel of silence is log(1e-6) everywhere") {
    FrontendConfig cfg = desk_config();
    const std::size_t m = cfg.n_fft / 2 + 1;
    const std::vector<std::complex<double>> spec(5 * m, 0.0);
    const MelSpec mel = mel_project(spec, 5, cfg);
    for (double v : mel.values) CHECK(v == std::log(1e-6));
}

TEST_CASE("invalid fmin/fmax rejected") {
    FrontendConfig cfg = desk_config();
    cfg.fmax = 9000.0;  // above Nyquist
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.fmax = 100.0;
    cfg.fmin = 200.0;  // fmin >= fmax
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("fix_length: equal, truncate, pad") {
    MelSpec mel;
    mel.frames = 4;
    mel.mel_bins = 3;
    mel.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    mel.normalized = true;

    const MelSpec same = fix_length(mel, 4);
    CHECK(same.values == mel.values);

    const MelSpec cut = fix_length(mel, 2);
    CHECK(cut.frames == 2);
    CHECK(cut.values == std::vector<double>{1, 2, 3, 4, 5, 6});

    const MelSpec pad = fix_length(mel, 6);
    CHECK(pad.frames == 6);
    for (std::size_t t = 4; t < 6; ++t)
        for (std::size_t f = 0; f < 3; ++f) CHECK(pad.at(t, f) == 0.0);  // zeros, not log(1e-6)
    CHECK(pad.normalized);
}

TEST_CASE("standardize: known statistics and the idempotence guard") {
    MelSpec a;
    a.frames = 1;
    a.mel_bins = 4;
    a.values = {1.0, 3.0, 5.0, 7.0};
    const Standardizer stats = compute_standardizer({a});
    CHECK(stats.mean == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(stats.stddev == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));

    MelSpec b = a;
    standardize(b, stats);
    CHECK(b.normalized);
    double mu = 0;
    for (double v : b.values) mu += v;
    CHECK(std::abs(mu) <= 1e-12);
    CHECK_THROWS_WITH_AS(standardize(b, stats), doctest::Contains("idempotence"), Error);
}

TEST_CASE("patch_slices: 8x4 mel with 2x2 patches matches the loop oracle") {
    FrontendConfig cfg;
    cfg.sample_rate = 16000;
    cfg.window_len = 400;
    cfg.hop_len = 160;
    cfg.n_fft = 512;
    cfg.mel_bins = 4;
    cfg.fmax = 8000.0;
    cfg.target_frames = 8;
    cfg.patch_t = 2;
    cfg.patch_f = 2;
    cfg.embed_dim = 3;
    cfg.seq_len = 8;  // (8/2) * (4/2)

    Rng rng(75);
    MelSpec mel;
    mel.frames = 8;
    mel.mel_bins = 4;
    mel.values.resize(32);
    for (double& v : mel.values) v = rng.normal();

    const std::vector<double> slices = patch_slices(mel, cfg);
    REQUIRE(slices.size() == cfg.seq_len * 4);

    const std::size_t nt = 4;
    for (std::size_t pf = 0; pf < 2; ++pf)
        for (std::size_t pt = 0; pt < nt; ++pt) {
            const std::size_t s = pf * nt + pt;  // time patch varies fastest
            for (std::size_t dt = 0; dt < 2; ++dt)
                for (std::size_t df = 0; df < 2; ++df) {
                    const double want = mel.at(pt * 2 + dt, pf * 2 + df);
                    CHECK(slices[s * 4 + dt * 2 + df] == want);
                }
        }

    // projection against a dense loop
    std::vector<double> weight(4 * 3), bias(3);
    for (double& v : weight) v = rng.normal();
    for (double& v : bias) v = rng.normal();
    const std::vector<double> tokens = patch_embed(mel, weight, bias, cfg);
    REQUIRE(tokens.size() == cfg.seq_len * 3);
    for (std::size_t s = 0; s < cfg.seq_len; ++s)
        for (std::size_t d = 0; d < 3; ++d) {
            double acc = bias[d];
            for (std::size_t p = 0; p < 4; ++p) acc += slices[s * 4 + p] * weight[p * 3 + d];
            CHECK(std::abs(tokens[s * 3 + d] - acc) <= 1e-12);
        }
}

TEST_CASE("degenerate 1x1 patches give one token per cell; zero weights zero tokens") {
    FrontendConfig cfg;
    cfg.sample_rate = 16000;
    cfg.window_len = 400;
    cfg.hop_len = 160;
    cfg.n_fft = 512;
    cfg.mel_bins = 2;
    cfg.fmax = 8000.0;
    cfg.target_frames = 3;
    cfg.patch_t = 1;
    cfg.patch_f = 1;
    cfg.embed_dim = 2;
    cfg.seq_len = 6;

    MelSpec mel;
    mel.frames = 3;
    mel.mel_bins = 2;
    mel.values = {10, 20, 30, 40, 50, 60};
    const std::vector<double> slices = patch_slices(mel, cfg);
    // s = pf * 3 + pt, patch value = mel(pt, pf)
    CHECK(slices == std::vector<double>{10, 30, 50, 20, 40, 60});

    const std::vector<double> tokens =
        patch_embed(mel, std::vector<double>(1 * 2, 0.0), std::vector<double>(2, 0.0), cfg);
    for (double v : tokens) CHECK(v == 0.0);
}

TEST_CASE("pipeline determinism: same file and config, identical features") {
    const fs::path p = tmp_dir() / "det.wav";
    Rng rng(76);
    std::vector<double> samples(16000);
    for (double& s : samples) s = 0.5 * std::sin(2.0 * kPi * 440.0 * (&s - samples.data()) / 16000.0) +
                                  0.05 * rng.normal();
    save_wav_pcm16(p, samples, 16000);

    FrontendConfig cfg = desk_config();
    const MelSpec a = frontend_features(load_wav(p), cfg);
    const MelSpec b = frontend_features(load_wav(p), cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("manifest parsing: header, labels, splits, relative paths, row errors") {
    const fs::path dir = tmp_dir();
    const fs::path p = dir / "manifest.csv";
    {
        std::ofstream out(p);
        out << "path,label,split\n";
        out << "a.wav,0,train\n";
        out << "sub/b.wav,2,val\n";
        out << "c.wav,1,test\n";
        out << "d.wav,3,fold7\n";
    }
    const DatasetManifest m = load_manifest(p);
    REQUIRE(m.entries.size() == 4);
    CHECK(m.entries[0].path == dir / "a.wav");
    CHECK(m.entries[1].path == dir / "sub/b.wav");
    CHECK(m.num_classes() == 4);
    CHECK(m.indices_for_split("train") == std::vector<std::size_t>{0});
    CHECK(m.has_split("val"));
    CHECK(m.folds() == std::vector<std::string>{"fold7"});

    {
        std::ofstream out(p);
        out << "path,label\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(p), doctest::Contains("header"), DataError);

    {
        std::ofstream out(p);
        out << "path,label,split\n";
        out << "a.wav,x,train\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(p), doctest::Contains("row 2"), DataError);

    {
        std::ofstream out(p);
        out << "path,label,split\n";
        out << "a.wav,-3,train\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(p), doctest::Contains("negative"), DataError);

    {
        std::ofstream out(p);
        out << "path,label,split\n";
        out << "a.wav,1,holdout\n";
    }
    CHECK_THROWS_WITH_AS(load_manifest(p), doctest::Contains("holdout"), DataError);
}
