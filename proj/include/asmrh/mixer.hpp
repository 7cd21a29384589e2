#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "asmrh/errors.hpp"
#include "asmrh/rng.hpp"
#include "asmrh/spectral.hpp"
#include "asmrh/tensor.hpp"

namespace asmrh {

// ---------------------------------------------------------------------------
// RollBlock
// ---------------------------------------------------------------------------

// Parameter-free circular-shift operator. A (B, H, W) activation is viewed
// as (B, C, H/C_a, W*C_a/C); the first four g-wide channel groups are
// circularly shifted +step/-step along the last axis and +step/-step along
// the second-to-last axis, where g = floor(C / (1 + alpha)) and
// step = model_depth - alpha. Group bounds are clamped to C, so groups that
// fall past the channel count are empty and untouched. Wrapped data is kept,
// making the whole operation a permutation.
struct RollConfig {
    std::size_t channel_folds = 16;  // C
    std::size_t height_folds = 4;    // C_a
    std::size_t alpha = 0;           // 0-based depth index of the block
    std::size_t model_depth = 1;

    std::size_t group_width() const { return channel_folds / (1 + alpha); }
    long step() const { return static_cast<long>(model_depth) - static_cast<long>(alpha); }

    void validate() const {
        if (channel_folds == 0 || height_folds == 0 || channel_folds % height_folds != 0)
            throw ConfigError(msg("RollConfig: C = ", channel_folds,
                                  " must be a positive multiple of C_a = ", height_folds));
        if (alpha >= model_depth)
            throw ConfigError(msg("RollConfig: alpha = ", alpha,
                                  " must be < model_depth = ", model_depth));
    }
};

namespace detail {

inline std::size_t wrap_index(long j, long size) {
    long r = j % size;
    if (r < 0) r += size;
    return static_cast<std::size_t>(r);
}

// out must not alias in. inverse negates every shift.
template <typename T>
void roll_buffer(const T* in, T* out, std::size_t batch, std::size_t height, std::size_t width,
                 const RollConfig& cfg, bool inverse) {
    cfg.validate();
    const std::size_t C = cfg.channel_folds;
    const std::size_t Ca = cfg.height_folds;
    if (height % Ca != 0 || (width * Ca) % C != 0)
        throw ShapeError(msg("roll: shape H = ", height, ", W = ", width,
                             " not divisible for C = ", C, ", C_a = ", Ca));
    const std::size_t H2 = height / Ca;
    const std::size_t W2 = width * Ca / C;
    const std::size_t g = cfg.group_width();
    const long step = inverse ? -cfg.step() : cfg.step();

    const std::size_t plane = H2 * W2;
    std::copy(in, in + batch * height * width, out);

    // group q: (shift sign, axis); axis 3 is W2, axis 2 is H2
    const long signs[4] = {+1, -1, +1, -1};
    const int axes[4] = {3, 3, 2, 2};
    for (int q = 0; q < 4; ++q) {
        const std::size_t c0 = std::min(static_cast<std::size_t>(q) * g, C);
        const std::size_t c1 = std::min(static_cast<std::size_t>(q + 1) * g, C);
        if (c0 >= c1) continue;
        const long s = signs[q] * step;
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = c0; c < c1; ++c) {
                const T* src = in + (b * C + c) * plane;
                T* dst = out + (b * C + c) * plane;
                if (axes[q] == 3) {
                    for (std::size_t i = 0; i < H2; ++i)
                        for (std::size_t j = 0; j < W2; ++j)
                            dst[i * W2 + j] =
                                src[i * W2 + wrap_index(static_cast<long>(j) - s,
                                                        static_cast<long>(W2))];
                } else {
                    for (std::size_t i = 0; i < H2; ++i) {
                        const std::size_t isrc =
                            wrap_index(static_cast<long>(i) - s, static_cast<long>(H2));
                        for (std::size_t j = 0; j < W2; ++j)
                            dst[i * W2 + j] = src[isrc * W2 + j];
                    }
                }
            }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> roll(const Tensor<T>& feat, const RollConfig& cfg) {
    if (feat.rank() != 3)
        throw ShapeError(msg("roll: expected rank-3 (B, H, W), got ", shape_str(feat.shape())));
    const std::size_t B = feat.shape()[0], H = feat.shape()[1], W = feat.shape()[2];
    Tensor<T> out = Tensor<T>::zeros(feat.shape());
    detail::roll_buffer(feat.data(), out.data(), B, H, W, cfg, false);

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = feat.node, on = out.node;
        tape->record(on, [xn, on, B, H, W, cfg] {
            ensure_grad(*xn);
            std::vector<T> gi(xn->value.size());
            detail::roll_buffer(on->grad.data(), gi.data(), B, H, W, cfg, true);
            for (std::size_t i = 0; i < gi.size(); ++i) xn->grad[i] += gi[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> roll_inverse(const Tensor<T>& feat, const RollConfig& cfg) {
    if (feat.rank() != 3)
        throw ShapeError(msg("roll_inverse: expected rank-3 (B, H, W), got ",
                             shape_str(feat.shape())));
    const std::size_t B = feat.shape()[0], H = feat.shape()[1], W = feat.shape()[2];
    Tensor<T> out = Tensor<T>::zeros(feat.shape());
    detail::roll_buffer(feat.data(), out.data(), B, H, W, cfg, true);

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = feat.node, on = out.node;
        tape->record(on, [xn, on, B, H, W, cfg] {
            ensure_grad(*xn);
            std::vector<T> gi(xn->value.size());
            detail::roll_buffer(on->grad.data(), gi.data(), B, H, W, cfg, false);
            for (std::size_t i = 0; i < gi.size(); ++i) xn->grad[i] += gi[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

// Standardize over the last axis (biased variance, epsilon inside the
// square root), then apply the affine gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-6)) {
    if (x.rank() < 1)
        throw ShapeError("layer_norm: input must have rank >= 1");
    const std::size_t D = x.shape()[x.rank() - 1];
    if (gain.rank() != 1 || gain.shape()[0] != D || bias.rank() != 1 || bias.shape()[0] != D)
        throw ShapeError(msg("layer_norm: gain ", shape_str(gain.shape()), " / bias ",
                             shape_str(bias.shape()), " do not match last axis of ",
                             shape_str(x.shape())));
    const std::size_t rows = x.numel() / D;

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    std::vector<T> xhat(x.numel());
    std::vector<T> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = x.data() + r * D;
        T mu = T(0);
        for (std::size_t d = 0; d < D; ++d) mu += row[d];
        mu /= T(D);
        T var = T(0);
        for (std::size_t d = 0; d < D; ++d) {
            const T c = row[d] - mu;
            var += c * c;
        }
        var /= T(D);
        const T s = T(1) / std::sqrt(var + eps);
        inv_std[r] = s;
        for (std::size_t d = 0; d < D; ++d) {
            const T h = (row[d] - mu) * s;
            xhat[r * D + d] = h;
            out.data()[r * D + d] = gain.data()[d] * h + bias.data()[d];
        }
    }
    maybe_check_finite(out, "layer_norm");

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, gn = gain.node, bn = bias.node, on = out.node;
        tape->record(on, [xn, gn, bn, on, rows, D, xhat = std::move(xhat),
                          inv_std = std::move(inv_std)] {
            ensure_grad(*xn);
            ensure_grad(*gn);
            ensure_grad(*bn);
            std::vector<T> dxhat(D);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* g = on->grad.data() + r * D;
                const T* h = xhat.data() + r * D;
                T m1 = T(0), m2 = T(0);
                for (std::size_t d = 0; d < D; ++d) {
                    gn->grad[d] += g[d] * h[d];
                    bn->grad[d] += g[d];
                    dxhat[d] = g[d] * gn->value[d];
                    m1 += dxhat[d];
                    m2 += dxhat[d] * h[d];
                }
                m1 /= T(D);
                m2 /= T(D);
                const T s = inv_std[r];
                for (std::size_t d = 0; d < D; ++d)
                    xn->grad[r * D + d] += s * (dxhat[d] - m1 - h[d] * m2);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Branches and blocks
// ---------------------------------------------------------------------------

enum class BranchKind { roll_time, hermit_frequency, channel, token };

struct MixingBranchConfig {
    std::size_t dim = 0;     // width the feed-forward acts on
    std::size_t hidden = 0;  // hidden width
    BranchKind kind = BranchKind::channel;

    void validate() const {
        if (dim == 0 || hidden == 0)
            throw ConfigError(msg("MixingBranchConfig: dim = ", dim, ", hidden = ", hidden,
                                  " must both be >= 1"));
    }
};

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

// linear(dim -> hidden) -> GELU -> linear(hidden -> dim), along the last axis.
template <typename T>
struct FeedForward {
    Tensor<T> w1, b1, w2, b2;
    std::size_t dim = 0, hidden = 0;

    FeedForward() = default;
    FeedForward(std::size_t dim_, std::size_t hidden_, Rng& rng)
        : w1(Tensor<T>::trunc_normal({dim_, hidden_}, rng, 0.02)),
          b1(Tensor<T>::zeros({hidden_})),
          w2(Tensor<T>::trunc_normal({hidden_, dim_}, rng, 0.02)),
          b2(Tensor<T>::zeros({dim_})),
          dim(dim_),
          hidden(hidden_) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.shape()[x.rank() - 1] != dim)
            throw ShapeError(msg("feed_forward: input ", shape_str(x.shape()),
                                 " does not end in dim = ", dim));
        Tensor<T> h = gelu(add_bias(matmul(x, w1), b1));
        return add_bias(matmul(h, w2), b2);
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + ".w1", w1});
        out.push_back({prefix + ".b1", b1});
        out.push_back({prefix + ".w2", w2});
        out.push_back({prefix + ".b2", b2});
    }
};

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForward<T>& ff) {
    return ff.forward(x);
}

template <typename T>
struct LayerNormParams {
    Tensor<T> gain, bias;

    LayerNormParams() = default;
    explicit LayerNormParams(std::size_t dim)
        : gain(Tensor<T>::full({dim}, T(1))), bias(Tensor<T>::zeros({dim})) {}

    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gain, bias); }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + ".gain", gain});
        out.push_back({prefix + ".bias", bias});
    }
};

// Residual mixing branch; forward returns x + branch(x).
template <typename T>
class MixingBranch {
public:
    virtual ~MixingBranch() = default;
    virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
    virtual void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) = 0;
    virtual BranchKind kind() const = 0;
    virtual const char* name() const = 0;
};

// x + FeedForward(Roll(LayerNorm(x))); the feed-forward acts along the
// embedding axis (channel-mixing slot).
template <typename T>
class RollTimeMixing final : public MixingBranch<T> {
public:
    RollTimeMixing(std::size_t embed_dim, std::size_t hidden, RollConfig roll_cfg, Rng& rng)
        : norm_(embed_dim), ff_(embed_dim, hidden, rng), roll_cfg_(roll_cfg) {
        roll_cfg_.validate();
    }

    Tensor<T> forward(const Tensor<T>& x) const override {
        return add(x, ff_.forward(roll(norm_.forward(x), roll_cfg_)));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
        norm_.collect(prefix + ".norm", out);
        ff_.collect(prefix + ".ff", out);
    }

    BranchKind kind() const override { return BranchKind::roll_time; }
    const char* name() const override { return "roll"; }

    const RollConfig& roll_config() const { return roll_cfg_; }

private:
    LayerNormParams<T> norm_;
    FeedForward<T> ff_;
    RollConfig roll_cfg_;
};

// x + IRFFT(transpose(FeedForward_S(transpose(HFFT(LayerNorm(x)))))).
// HFFT/IRFFT act along the embedding axis with output length embed_dim so
// the activation shape is preserved; the feed-forward acts along the token
// axis between the two transpositions (token-mixing slot).
template <typename T>
class HermitFrequencyMixing final : public MixingBranch<T> {
public:
    HermitFrequencyMixing(std::size_t seq_len, std::size_t embed_dim, std::size_t hidden,
                          Rng& rng)
        : norm_(embed_dim), ff_(seq_len, hidden, rng), embed_dim_(embed_dim) {
        if (embed_dim < 4)
            throw ConfigError(msg("hermit_frequency_mixing: embed_dim must be >= 4, got ",
                                  embed_dim));
    }

    Tensor<T> forward(const Tensor<T>& x) const override {
        Tensor<T> spec = hfft_last(norm_.forward(x), embed_dim_);
        Tensor<T> mixed = transpose_last2(ff_.forward(transpose_last2(spec)));
        return add(x, irfft_last(mixed, embed_dim_));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
        norm_.collect(prefix + ".norm", out);
        ff_.collect(prefix + ".ff", out);
    }

    BranchKind kind() const override { return BranchKind::hermit_frequency; }
    const char* name() const override { return "hermit"; }

private:
    LayerNormParams<T> norm_;
    FeedForward<T> ff_;
    std::size_t embed_dim_;
};

// Plain Mixer channel-mixing: x + FeedForward(LayerNorm(x)) along embed_dim.
template <typename T>
class ChannelMixing final : public MixingBranch<T> {
public:
    ChannelMixing(std::size_t embed_dim, std::size_t hidden, Rng& rng)
        : norm_(embed_dim), ff_(embed_dim, hidden, rng) {}

    Tensor<T> forward(const Tensor<T>& x) const override {
        return add(x, ff_.forward(norm_.forward(x)));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
        norm_.collect(prefix + ".norm", out);
        ff_.collect(prefix + ".ff", out);
    }

    BranchKind kind() const override { return BranchKind::channel; }
    const char* name() const override { return "channel"; }

private:
    LayerNormParams<T> norm_;
    FeedForward<T> ff_;
};

// Plain Mixer token-mixing: x + transpose(FeedForward_S(transpose(LayerNorm(x)))).
template <typename T>
class TokenMixing final : public MixingBranch<T> {
public:
    TokenMixing(std::size_t seq_len, std::size_t embed_dim, std::size_t hidden, Rng& rng)
        : norm_(embed_dim), ff_(seq_len, hidden, rng) {}

    Tensor<T> forward(const Tensor<T>& x) const override {
        return add(x, transpose_last2(ff_.forward(transpose_last2(norm_.forward(x)))));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
        norm_.collect(prefix + ".norm", out);
        ff_.collect(prefix + ".ff", out);
    }

    BranchKind kind() const override { return BranchKind::token; }
    const char* name() const override { return "token"; }

private:
    LayerNormParams<T> norm_;
    FeedForward<T> ff_;
};

// One mixer layer: the token slot runs first, the channel slot second.
template <typename T>
struct MixerBlock {
    std::unique_ptr<MixingBranch<T>> token_slot;
    std::unique_ptr<MixingBranch<T>> channel_slot;

    Tensor<T> forward(const Tensor<T>& x) const {
        return channel_slot->forward(token_slot->forward(x));
    }
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

enum class Variant { RH, H, R, baseline };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::RH: return "RH";
        case Variant::H: return "H";
        case Variant::R: return "R";
        case Variant::baseline: return "baseline";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "RH") return Variant::RH;
    if (s == "H") return Variant::H;
    if (s == "R") return Variant::R;
    if (s == "baseline") return Variant::baseline;
    throw ConfigError(msg("unknown variant '", s, "' (expected RH, H, R or baseline)"));
}

struct ModelConfig {
    std::size_t seq_len = 600;
    std::size_t embed_dim = 768;
    std::size_t depth = 12;
    double ff_expansion_channel = 4.0;
    double ff_expansion_token = 0.5;
    std::size_t num_classes = 0;  // 0 = unset; the CLI resolves it from the manifest
    Variant variant = Variant::RH;
    std::size_t roll_channel_folds = 16;  // C
    std::size_t roll_height_folds = 4;    // C_a

    std::size_t hidden_channel() const {
        return std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(ff_expansion_channel *
                                                     static_cast<double>(embed_dim))));
    }
    std::size_t hidden_token() const {
        return std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(ff_expansion_token *
                                                     static_cast<double>(seq_len))));
    }

    void validate() const {
        if (seq_len == 0 || embed_dim == 0)
            throw ConfigError(msg("ModelConfig: seq_len = ", seq_len, " and embed_dim = ",
                                  embed_dim, " must be positive"));
        if (depth < 1) throw ConfigError("ModelConfig: depth must be >= 1");
        if (embed_dim < 4)
            throw ConfigError(msg("ModelConfig: embed_dim must be >= 4, got ", embed_dim));
        if (num_classes < 1)
            throw ConfigError("ModelConfig: num_classes is unset; give it a value or let "
                              "the CLI take it from the manifest");
        if (ff_expansion_channel <= 0 || ff_expansion_token <= 0)
            throw ConfigError("ModelConfig: feed-forward expansion factors must be positive");
        if (roll_channel_folds == 0 || roll_height_folds == 0 ||
            roll_channel_folds % roll_height_folds != 0)
            throw ConfigError(msg("ModelConfig: C = ", roll_channel_folds,
                                  " must be a positive multiple of C_a = ", roll_height_folds));
        if (seq_len % roll_height_folds != 0)
            throw ConfigError(msg("ModelConfig: seq_len = ", seq_len,
                                  " must be divisible by C_a = ", roll_height_folds));
        if ((embed_dim * roll_height_folds) % roll_channel_folds != 0)
            throw ConfigError(msg("ModelConfig: embed_dim * C_a = ",
                                  embed_dim * roll_height_folds,
                                  " must be divisible by C = ", roll_channel_folds));
    }
};

// The full classifier: optional patch projection, `depth` mixer blocks,
// final layer norm, mean pool over tokens, linear head. No class or
// distillation tokens and no positional embedding anywhere.
template <typename T>
class MixerModel {
public:
    // patch_dim == 0 builds a token-input model without a projection layer.
    MixerModel(const ModelConfig& cfg, std::size_t patch_dim, std::uint64_t seed)
        : cfg_(cfg), patch_dim_(patch_dim) {
        cfg_.validate();
        Rng rng(seed);
        if (patch_dim_ > 0) {
            embed_w_ = Tensor<T>::trunc_normal({patch_dim_, cfg_.embed_dim}, rng, 0.02);
            embed_b_ = Tensor<T>::zeros({cfg_.embed_dim});
        }
        for (std::size_t i = 0; i < cfg_.depth; ++i) {
            MixerBlock<T> block;
            const bool hermit = cfg_.variant == Variant::RH || cfg_.variant == Variant::H;
            const bool rolled = cfg_.variant == Variant::RH || cfg_.variant == Variant::R;
            if (hermit)
                block.token_slot = std::make_unique<HermitFrequencyMixing<T>>(
                    cfg_.seq_len, cfg_.embed_dim, cfg_.hidden_token(), rng);
            else
                block.token_slot = std::make_unique<TokenMixing<T>>(
                    cfg_.seq_len, cfg_.embed_dim, cfg_.hidden_token(), rng);
            if (rolled) {
                RollConfig rc;
                rc.channel_folds = cfg_.roll_channel_folds;
                rc.height_folds = cfg_.roll_height_folds;
                rc.alpha = i;
                rc.model_depth = cfg_.depth;
                block.channel_slot = std::make_unique<RollTimeMixing<T>>(
                    cfg_.embed_dim, cfg_.hidden_channel(), rc, rng);
            } else {
                block.channel_slot = std::make_unique<ChannelMixing<T>>(
                    cfg_.embed_dim, cfg_.hidden_channel(), rng);
            }
            blocks_.push_back(std::move(block));
        }
        final_norm_ = LayerNormParams<T>(cfg_.embed_dim);
        head_w_ = Tensor<T>::trunc_normal({cfg_.embed_dim, cfg_.num_classes}, rng, 0.02);
        head_b_ = Tensor<T>::zeros({cfg_.num_classes});
        rebuild_params();
    }

    MixerModel(const MixerModel&) = delete;
    MixerModel& operator=(const MixerModel&) = delete;
    MixerModel(MixerModel&&) = default;
    MixerModel& operator=(MixerModel&&) = default;

    const ModelConfig& config() const { return cfg_; }
    std::size_t patch_dim() const { return patch_dim_; }
    const std::vector<MixerBlock<T>>& blocks() const { return blocks_; }

    Tensor<T> embed(const Tensor<T>& patches) const {
        if (patch_dim_ == 0)
            throw Error("embed: model was built without a patch projection");
        if (patches.rank() != 3 || patches.shape()[1] != cfg_.seq_len ||
            patches.shape()[2] != patch_dim_)
            throw ShapeError(msg("embed: expected (B, ", cfg_.seq_len, ", ", patch_dim_,
                                 "), got ", shape_str(patches.shape())));
        return add_bias(matmul(patches, embed_w_), embed_b_);
    }

    // tokens (B, S, D) -> activations (B, S, D) after all blocks
    Tensor<T> forward_blocks(const Tensor<T>& tokens) const {
        check_tokens(tokens);
        Tensor<T> x = tokens;
        for (const MixerBlock<T>& b : blocks_) x = b.forward(x);
        return x;
    }

    // tokens (B, S, D) -> logits (B, num_classes)
    Tensor<T> forward_tokens(const Tensor<T>& tokens) const {
        Tensor<T> x = forward_blocks(tokens);
        x = final_norm_.forward(x);
        x = reduce(x, 1, Reduce::mean);  // pool over tokens
        return add_bias(matmul(x, head_w_), head_b_);
    }

    // patches (B, S, P) -> logits
    Tensor<T> forward_patches(const Tensor<T>& patches) const {
        return forward_tokens(embed(patches));
    }

    std::vector<NamedParam<T>>& parameters() { return params_; }
    const std::vector<NamedParam<T>>& parameters() const { return params_; }

    Tensor<T>& param(const std::string& name) {
        for (NamedParam<T>& p : params_)
            if (p.name == name) return p.tensor;
        throw Error(msg("param: no parameter named '", name, "'"));
    }

private:
    void check_tokens(const Tensor<T>& tokens) const {
        if (tokens.rank() != 3 || tokens.shape()[1] != cfg_.seq_len ||
            tokens.shape()[2] != cfg_.embed_dim)
            throw ShapeError(msg("forward: expected tokens (B, ", cfg_.seq_len, ", ",
                                 cfg_.embed_dim, "), got ", shape_str(tokens.shape())));
    }

    void rebuild_params() {
        params_.clear();
        if (patch_dim_ > 0) {
            params_.push_back({"embed.weight", embed_w_});
            params_.push_back({"embed.bias", embed_b_});
        }
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const std::string base = "block" + std::to_string(i);
            blocks_[i].token_slot->collect(base + "." + blocks_[i].token_slot->name(), params_);
            blocks_[i].channel_slot->collect(base + "." + blocks_[i].channel_slot->name(),
                                             params_);
        }
        final_norm_.collect("final_norm", params_);
        params_.push_back({"head.weight", head_w_});
        params_.push_back({"head.bias", head_b_});
        for (NamedParam<T>& p : params_) p.tensor.set_requires_grad(true);
    }

    ModelConfig cfg_;
    std::size_t patch_dim_ = 0;
    Tensor<T> embed_w_, embed_b_;
    std::vector<MixerBlock<T>> blocks_;
    LayerNormParams<T> final_norm_;
    Tensor<T> head_w_, head_b_;
    std::vector<NamedParam<T>> params_;
};

// RH = hermit + roll, H = hermit + channel, R = token + roll,
// baseline = token + channel (standard Mixer block).
template <typename T>
MixerModel<T> build_variant(const ModelConfig& cfg, std::size_t patch_dim, std::uint64_t seed) {
    return MixerModel<T>(cfg, patch_dim, seed);
}

}  // namespace asmrh
