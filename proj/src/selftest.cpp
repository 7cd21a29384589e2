#include "asmrh/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <ostream>

#include "asmrh/metrics.hpp"
#include "asmrh/mixer.hpp"
#include "asmrh/rng.hpp"
#include "asmrh/spectral.hpp"
#include "asmrh/train.hpp"

namespace asmrh {

namespace {

using spectral::cplx;

PropertyResult fft_vs_naive() {
    PropertyResult r{"fft-vs-naive-dft", true, 0.0, ""};
    Rng rng(11);
    std::vector<std::size_t> sizes;
    for (std::size_t n = 2; n <= 32; ++n) sizes.push_back(n);
    sizes.push_back(48);
    sizes.push_back(64);
    sizes.push_back(385);
    for (std::size_t n : sizes) {
        std::vector<cplx> x(n);
        for (cplx& v : x) v = cplx(rng.normal(), rng.normal());
        const std::vector<cplx> a = spectral::fft(x, -1);
        const std::vector<cplx> b = spectral::dft_naive(x, -1);
        for (std::size_t i = 0; i < n; ++i)
            r.worst = std::max(r.worst, std::abs(a[i] - b[i]));
    }
    r.pass = r.worst <= 1e-9;
    if (!r.pass) r.detail = "fft disagrees with the quadratic DFT";
    return r;
}

PropertyResult hermitian_roundtrip(const SelftestHooks& hooks) {
    PropertyResult r{"hermitian-realness-roundtrip", true, 0.0, ""};
    Rng rng(12);
    try {
        for (std::size_t n : {4ul, 7ul, 16ul, 31ul, 64ul, 96ul}) {
            const std::size_t m = n / 2 + 1;
            std::vector<double> y(m);
            for (double& v : y) v = rng.normal();
            const std::vector<double> t =
                hooks.hfft ? hooks.hfft(y, n) : spectral::hfft(y, n);
            if (t.size() != n) {
                r.pass = false;
                r.detail = "hfft output length mismatch";
                return r;
            }
            const std::vector<double> y2 = spectral::ihfft(t, n);
            for (std::size_t i = 0; i < m; ++i)
                r.worst = std::max(r.worst, std::abs(y[i] - y2[i]));

            std::vector<double> x(n);
            for (double& v : x) v = rng.normal();
            const std::vector<double> x2 = spectral::irfft(spectral::rfft(x), n);
            for (std::size_t i = 0; i < n; ++i)
                r.worst = std::max(r.worst, std::abs(x[i] - x2[i]));
        }
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = e.what();
        return r;
    }
    r.pass = r.worst <= 1e-9;
    if (!r.pass) r.detail = "inverse does not restore the forward input";
    return r;
}

// Forward-direction index map built independently of roll_buffer: the element
// at (c, i, j) lands at (c, i, j) shifted +/-step along its group's axis.
PropertyResult roll_permutation() {
    PropertyResult r{"roll-permutation", true, 0.0, ""};
    Rng rng(13);
    for (std::size_t depth : {1ul, 3ul, 6ul, 12ul}) {
        for (std::size_t alpha = 0; alpha < depth; ++alpha) {
            RollConfig cfg;
            cfg.alpha = alpha;
            cfg.model_depth = depth;
            const std::size_t B = 2, H = 8, W = 16;  // view: (2, 16, 2, 4)
            std::vector<double> in(B * H * W);
            for (double& v : in) v = rng.normal();
            std::vector<double> out(in.size());
            detail::roll_buffer(in.data(), out.data(), B, H, W, cfg, false);

            const std::size_t C = cfg.channel_folds;
            const std::size_t H2 = H / cfg.height_folds;
            const std::size_t W2 = W * cfg.height_folds / C;
            const std::size_t g = cfg.group_width();
            const long step = cfg.step();
            auto wrap = [](long v, long m) { return ((v % m) + m) % m; };
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < H2; ++i)
                        for (std::size_t j = 0; j < W2; ++j) {
                            std::size_t di = i, dj = j;
                            const std::size_t q = g == 0 ? 4 : c / g;
                            if (q == 0) dj = wrap(static_cast<long>(j) + step, W2);
                            else if (q == 1) dj = wrap(static_cast<long>(j) - step, W2);
                            else if (q == 2) di = wrap(static_cast<long>(i) + step, H2);
                            else if (q == 3) di = wrap(static_cast<long>(i) - step, H2);
                            const double src = in[((b * C + c) * H2 + i) * W2 + j];
                            const double dst = out[((b * C + c) * H2 + di) * W2 + dj];
                            r.worst = std::max(r.worst, std::abs(src - dst));
                        }

            std::vector<double> back(in.size());
            detail::roll_buffer(out.data(), back.data(), B, H, W, cfg, true);
            for (std::size_t i = 0; i < in.size(); ++i)
                r.worst = std::max(r.worst, std::abs(in[i] - back[i]));
        }
    }
    r.pass = r.worst == 0.0;
    if (!r.pass) r.detail = "roll deviates from the index-map oracle";
    return r;
}

PropertyResult gradient_check() {
    PropertyResult r{"gradient-check", true, 0.0, ""};
    ModelConfig cfg;
    cfg.seq_len = 8;
    cfg.embed_dim = 16;
    cfg.depth = 1;
    cfg.num_classes = 3;
    cfg.variant = Variant::RH;
    MixerModel<double> model(cfg, 0, 21);

    Rng rng(22);
    std::vector<double> xbuf(2 * cfg.seq_len * cfg.embed_dim);
    for (double& v : xbuf) v = rng.normal();
    const std::vector<std::size_t> labels = {0, 2};

    auto loss_value = [&](const Tensor<double>& inp) {
        return cross_entropy(model.forward_tokens(inp), labels).item();
    };

    Tensor<double> x = Tensor<double>::from_data({2, cfg.seq_len, cfg.embed_dim}, xbuf);
    x.set_requires_grad(true);
    {
        Tape<double> tape;
        const Tensor<double> loss = cross_entropy(model.forward_tokens(x), labels);
        tape.backward(loss);
    }

    const double h = 1e-5;
    auto probe = [&](Tensor<double>& t, std::size_t i, double analytic) {
        const double keep = t.data()[i];
        t.data()[i] = keep + h;
        const double up = loss_value(x);
        t.data()[i] = keep - h;
        const double dn = loss_value(x);
        t.data()[i] = keep;
        const double fd = (up - dn) / (2 * h);
        const double rel = std::abs(fd - analytic) / std::max({1.0, std::abs(fd)});
        r.worst = std::max(r.worst, rel);
    };

    Rng pick(23);
    for (NamedParam<double>& p : model.parameters())
        for (int k = 0; k < 2; ++k) {
            const std::size_t i = pick.index(p.tensor.numel());
            probe(p.tensor, i, p.tensor.grad()[i]);
        }
    for (int k = 0; k < 8; ++k) {
        const std::size_t i = pick.index(x.numel());
        probe(x, i, x.grad()[i]);
    }
    r.pass = r.worst <= 1e-4;
    if (!r.pass) r.detail = "analytic gradient disagrees with central differences";
    return r;
}

PropertyResult auc_pairwise() {
    PropertyResult r{"auc-rank-vs-pairwise", true, 0.0, ""};
    Rng rng(31);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 5 + rng.index(60);
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid so ties actually happen
            scores[i] = rng.index(6) / 5.0;
            pos[i] = rng.uniform() < 0.4;
            n_pos += pos[i] ? 1 : 0;
        }
        if (n_pos == 0 || n_pos == n) continue;
        const double fast = auc_one_vs_rest(scores, pos);
        double wins = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!pos[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (pos[j]) continue;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
        const double slow = wins / (static_cast<double>(n_pos) *
                                    static_cast<double>(n - n_pos));
        r.worst = std::max(r.worst, std::abs(fast - slow));
    }
    r.pass = r.worst == 0.0;
    if (!r.pass) r.detail = "rank-based AUC deviates from the pairwise definition";
    return r;
}

}  // namespace

std::vector<PropertyResult> run_selftest(const SelftestHooks& hooks) {
    std::vector<PropertyResult> out;
    out.push_back(fft_vs_naive());
    out.push_back(hermitian_roundtrip(hooks));
    out.push_back(roll_permutation());
    out.push_back(gradient_check());
    out.push_back(auc_pairwise());
    return out;
}

bool selftest_ok(const std::vector<PropertyResult>& results) {
    for (const PropertyResult& r : results)
        if (!r.pass) return false;
    return true;
}

void print_selftest(std::ostream& os, const std::vector<PropertyResult>& results) {
    for (const PropertyResult& r : results) {
        os << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  worst-error "
           << r.worst;
        if (!r.pass && !r.detail.empty()) os << "  (" << r.detail << ")";
        os << "\n";
    }
}

}  // namespace asmrh
