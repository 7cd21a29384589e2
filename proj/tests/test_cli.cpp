#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "asmrh/audio.hpp"
#include "asmrh/rng.hpp"
#include "asmrh/selftest.hpp"
#include "asmrh/spectral.hpp"

// Binary under test; injected by the build so the suite works from any cwd.
#ifndef ASMRH_CLI_PATH
#error "ASMRH_CLI_PATH must be defined"
#endif

using namespace asmrh;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "asmrh_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path out_path = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err_path = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = std::string(ASMRH_CLI_PATH) + " " + args + " >" +
                            out_path.string() + " 2>" + err_path.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

// two tone classes, long enough for the default 400-sample window
void write_tone(const fs::path& path, int label, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> samples(800);
    const double freq = label == 0 ? 200.0 : 2000.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = 0.5 * std::sin(2.0 * kPi * freq * i / 16000.0) + 0.01 * rng.normal();
    save_wav_pcm16(path, samples, 16000);
}

// tiny geometry: 6 frames of 4 mel bins, 3x2 patches -> 4 tokens of width 6
const char* kTinyConfig = R"({
  "frontend": {"mel_bins": 4, "target_frames": 6, "patch_t": 3, "patch_f": 2,
               "embed_dim": 8, "seq_len": 4},
  "model": {"depth": 1},
  "train": {"epochs": 2, "batch_size": 4, "lr0": 0.002, "seed": 3}
})";

// one shared dataset + trained checkpoint reused across the cases below
struct Fixture {
    fs::path dir;
    fs::path manifest;
    fs::path config;
    fs::path out;

    Fixture() {
        dir = work_dir() / "fixture";
        fs::create_directories(dir);
        manifest = dir / "manifest.csv";
        std::ofstream man(manifest);
        man << "path,label,split\n";
        for (int i = 0; i < 8; ++i) {
            const std::string name = "train_" + std::to_string(i) + ".wav";
            write_tone(dir / name, i % 2, 300 + i);
            man << name << "," << i % 2 << ",train\n";
        }
        for (int i = 0; i < 4; ++i) {
            const std::string name = "test_" + std::to_string(i) + ".wav";
            write_tone(dir / name, i % 2, 400 + i);
            man << name << "," << i % 2 << ",test\n";
        }
        man.close();

        config = dir / "config.json";
        std::ofstream(config) << kTinyConfig;
        out = dir / "run";
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

const RunResult& trained_run() {
    static RunResult r = run_cli("train --config " + fixture().config.string() +
                                 " --manifest " + fixture().manifest.string() + " --out " +
                                 fixture().out.string());
    return r;
}

}  // namespace

TEST_CASE("train: exit 0, metrics lines per epoch per split, artifacts on disk") {
    const RunResult& r = trained_run();
    CHECK(r.exit_code == 0);

    // 2 epochs x (train, test): metrics.jsonl mirrors stdout minus the summary line
    const std::string metrics = read_file(fixture().out / "metrics.jsonl");
    CHECK(count_lines(metrics) == 4);
    CHECK(r.out.find(metrics.substr(0, metrics.find('\n'))) == 0);
    CHECK(fs::exists(fixture().out / "checkpoint.bin"));
    CHECK(fs::exists(fixture().out / "effective-config.json"));

    // every metrics line tags a known split
    std::istringstream lines(metrics);
    std::string line;
    std::size_t train_n = 0, test_n = 0;
    while (std::getline(lines, line)) {
        if (line.find("\"split\":\"train\"") != std::string::npos) ++train_n;
        if (line.find("\"split\":\"test\"") != std::string::npos) ++test_n;
    }
    CHECK(train_n == 2);
    CHECK(test_n == 2);

    // the echoed config carries the manifest-resolved class count
    const std::string effective = read_file(fixture().out / "effective-config.json");
    CHECK(effective.find("\"num_classes\": 2") != std::string::npos);
}

TEST_CASE("train: missing manifest exits 3 naming the path") {
    const RunResult r = run_cli("train --manifest /no/such/manifest.csv --out " +
                                (work_dir() / "x").string());
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("/no/such/manifest.csv") != std::string::npos);
}

TEST_CASE("train: unknown config key exits 2 naming the key") {
    const fs::path bad = work_dir() / "bad_config.json";
    std::ofstream(bad) << R"({"model":{"depht":1}})";
    const RunResult r = run_cli("train --config " + bad.string() + " --manifest " +
                                fixture().manifest.string() + " --out " +
                                (work_dir() / "y").string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("depht") != std::string::npos);
}

TEST_CASE("train: bad variant flag exits 2") {
    const RunResult r = run_cli("train --variant XYZ --manifest " +
                                fixture().manifest.string() + " --out " +
                                (work_dir() / "z").string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("XYZ") != std::string::npos);
}

TEST_CASE("eval: deterministic, and empty split exits 3") {
    trained_run();
    const std::string base = "eval --checkpoint " +
                             (fixture().out / "checkpoint.bin").string() + " --manifest " +
                             fixture().manifest.string();
    const RunResult a = run_cli(base + " --split test");
    const RunResult b = run_cli(base + " --split test");
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"split\":\"test\"") != std::string::npos);

    const RunResult c = run_cli(base + " --split val");
    CHECK(c.exit_code == 3);
    CHECK(c.err.find("val") != std::string::npos);
}

TEST_CASE("eval: a missing checkpoint is a format/data failure, not a crash") {
    const RunResult r = run_cli("eval --checkpoint /no/such.bin --manifest " +
                                fixture().manifest.string());
    CHECK(r.exit_code == 3);
}

TEST_CASE("infer: scores sum to one, output is stable, silence stays finite") {
    trained_run();
    const fs::path wav = work_dir() / "probe.wav";
    write_tone(wav, 1, 999);
    const std::string cmd = "infer --checkpoint " +
                            (fixture().out / "checkpoint.bin").string() + " " + wav.string();
    const RunResult a = run_cli(cmd);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == run_cli(cmd).out);

    std::istringstream lines(a.out);
    std::string label_line, score_line;
    std::getline(lines, label_line);
    std::getline(lines, score_line);
    CHECK(label_line.rfind("label ", 0) == 0);
    REQUIRE(score_line.rfind("scores ", 0) == 0);
    std::istringstream score_stream(score_line.substr(7));
    double v = 0.0, sum = 0.0;
    std::size_t n = 0;
    while (score_stream >> v) {
        CHECK(std::isfinite(v));
        sum += v;
        ++n;
    }
    CHECK(n == 2);
    CHECK(std::abs(sum - 1.0) <= 1e-6);

    const fs::path quiet = work_dir() / "silence.wav";
    save_wav_pcm16(quiet, std::vector<double>(800, 0.0), 16000);
    const RunResult s = run_cli("infer --checkpoint " +
                                (fixture().out / "checkpoint.bin").string() + " " +
                                quiet.string());
    CHECK(s.exit_code == 0);
    CHECK(s.out.rfind("label ", 0) == 0);

    const RunResult bad = run_cli("infer --checkpoint " +
                                  (fixture().out / "checkpoint.bin").string() + " " +
                                  fixture().manifest.string());
    CHECK(bad.exit_code == 3);  // a CSV is not a WAV
}

TEST_CASE("kfold: two folds produce two checkpoints and a consistent summary") {
    const fs::path dir = work_dir() / "kfold";
    fs::create_directories(dir);
    const fs::path manifest = dir / "manifest.csv";
    std::ofstream man(manifest);
    man << "path,label,split\n";
    for (int f = 0; f < 2; ++f)
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 2; ++i) {
                const std::string name =
                    "f" + std::to_string(f) + "c" + std::to_string(c) + "i" +
                    std::to_string(i) + ".wav";
                write_tone(dir / name, c, 500 + f * 16 + c * 4 + i);
                man << name << "," << c << ",fold" << f << "\n";
            }
    man.close();

    const fs::path out = dir / "run";
    const RunResult r = run_cli("kfold --config " + fixture().config.string() +
                                " --manifest " + manifest.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out / "checkpoint-fold0.bin"));
    CHECK(fs::exists(out / "checkpoint-fold1.bin"));

    const std::string summary = read_file(out / "summary.txt");
    CHECK(summary.find("fold0") != std::string::npos);
    CHECK(summary.find("fold1") != std::string::npos);
    CHECK(summary.find("mean_acc") != std::string::npos);
    CHECK(r.out.find(summary) != std::string::npos);

    // fold-tagged metrics lines: 2 folds x 2 epochs x train split
    const std::string metrics = read_file(out / "metrics.jsonl");
    CHECK(count_lines(metrics) == 4);
    CHECK(metrics.find("fold0/train") != std::string::npos);
    CHECK(metrics.find("fold1/train") != std::string::npos);
}

TEST_CASE("selftest passes on a fresh build") {
    const RunResult r = run_cli("selftest");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("selftest catches an injected transform fault") {
    // mutation check: a sign error in the forward transform must not slip
    // through the property suite
    asmrh::SelftestHooks hooks;
    hooks.hfft = [](const std::vector<double>& y, std::size_t n) {
        std::vector<double> out = asmrh::spectral::hfft(y, n);
        for (double& v : out) v = -v;
        return out;
    };
    const auto results = asmrh::run_selftest(hooks);
    CHECK_FALSE(asmrh::selftest_ok(results));
    bool clean_parts_still_pass = false;
    for (const auto& r : results) clean_parts_still_pass |= r.pass;
    CHECK(clean_parts_still_pass);  // the fault is localized, not a harness crash
}

TEST_CASE("help exits 0; a bad subcommand exits 2") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);  // a subcommand is required
}
