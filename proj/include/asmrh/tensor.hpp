#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "asmrh/errors.hpp"
#include "asmrh/rng.hpp"

namespace asmrh {

inline std::size_t numel_of(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

// Global debug switch: when enabled every op asserts its output is finite.
inline std::atomic<bool>& finite_check_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}
inline void set_finite_checks(bool on) { finite_check_flag().store(on); }
inline bool finite_checks_enabled() { return finite_check_flag().load(); }

template <typename T>
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty means "no gradient yet"
    bool requires_grad = false;
};

template <typename T>
void ensure_grad(TensorNode<T>& node) {
    if (node.grad.empty()) node.grad.assign(node.value.size(), T(0));
}

// Dense row-major tensor handle. Copies share the underlying node, so an
// op's inputs and the gradients written back to them stay connected.
// Values are treated as immutable once an op has consumed them; only the
// grad slot (and parameter values between training steps) are mutated.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.node = std::make_shared<TensorNode<T>>();
        t.node->value.assign(numel_of(shape), T(0));
        t.node->shape = std::move(shape);
        return t;
    }

    static Tensor full(std::vector<std::size_t> shape, T v) {
        Tensor t = zeros(std::move(shape));
        for (T& x : t.node->value) x = v;
        return t;
    }

    static Tensor scalar(T v) { return full({}, v); }

    static Tensor from_data(std::vector<std::size_t> shape, std::vector<T> data) {
        if (numel_of(shape) != data.size())
            throw ShapeError(msg("from_data: shape ", shape_str(shape), " wants ",
                                 numel_of(shape), " elements, got ", data.size()));
        Tensor t;
        t.node = std::make_shared<TensorNode<T>>();
        t.node->shape = std::move(shape);
        t.node->value = std::move(data);
        return t;
    }

    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
        Tensor t = zeros(std::move(shape));
        for (T& x : t.node->value) x = static_cast<T>(rng.normal() * stddev);
        return t;
    }

    static Tensor trunc_normal(std::vector<std::size_t> shape, Rng& rng, double stddev) {
        Tensor t = zeros(std::move(shape));
        for (T& x : t.node->value) x = static_cast<T>(rng.trunc_normal(stddev));
        return t;
    }

    bool defined() const { return node != nullptr; }
    const std::vector<std::size_t>& shape() const { return node->shape; }
    std::size_t rank() const { return node->shape.size(); }
    std::size_t numel() const { return node->value.size(); }

    T* data() { return node->value.data(); }
    const T* data() const { return node->value.data(); }
    std::vector<T>& values() & { return node->value; }
    const std::vector<T>& values() const& { return node->value; }
    // on a temporary handle the node would die with it; hand out a copy so
    // `for (v : op(x).values())` cannot dangle
    std::vector<T> values() && { return node->value; }

    T item() const {
        if (numel() != 1)
            throw ShapeError(msg("item: tensor has shape ", shape_str(shape())));
        return node->value[0];
    }

    T at(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != rank())
            throw ShapeError(msg("at: got ", idx.size(), " indices for rank ", rank()));
        std::size_t flat = 0;
        std::size_t d = 0;
        for (std::size_t i : idx) flat = flat * node->shape[d] + i, ++d;
        return node->value[flat];
    }

    Tensor clone() const {
        Tensor t;
        t.node = std::make_shared<TensorNode<T>>(*node);
        return t;
    }

    bool requires_grad() const { return node->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        node->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !node->grad.empty(); }
    const std::vector<T>& grad() const {
        if (node->grad.empty())
            throw Error("grad: no gradient has been accumulated for this tensor");
        return node->grad;
    }
    std::vector<T>& grad_mut() {
        ensure_grad(*node);
        return node->grad;
    }
    void zero_grad() { node->grad.clear(); }

    void check_finite(const char* what = "tensor") const {
        for (std::size_t i = 0; i < node->value.size(); ++i)
            if (!std::isfinite(static_cast<double>(node->value[i])))
                throw NumericError(msg(what, ": non-finite value at flat index ", i));
    }

    std::shared_ptr<TensorNode<T>> node;
};

template <typename T>
void maybe_check_finite(const Tensor<T>& t, const char* op) {
    if (finite_checks_enabled()) t.check_finite(op);
}

// Reverse-mode tape. Ops append entries in forward (topological) order;
// backward() replays them in reverse, accumulating gradients additively.
// Constructing a Tape makes it the active recorder for this thread.
template <typename T>
class Tape {
public:
    Tape() { stack().push_back(this); }
    ~Tape() { stack().pop_back(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return stack().empty() ? nullptr : stack().back(); }

    void record(std::shared_ptr<TensorNode<T>> output, std::function<void()> pull) {
        entries_.push_back(Entry{std::move(output), std::move(pull)});
    }

    std::size_t size() const { return entries_.size(); }

    // Seeds d(loss)/d(loss) = 1 and pulls gradients back through every
    // recorded op. Intermediate (op-output) grads are reset first, so
    // calling backward twice adds the same leaf gradients twice.
    void backward(const Tensor<T>& loss) {
        if (!loss.defined() || loss.numel() != 1)
            throw ShapeError(msg("backward: loss must be a scalar, got shape ",
                                 loss.defined() ? shape_str(loss.shape()) : "<undefined>"));
        for (Entry& e : entries_) e.output->grad.clear();
        ensure_grad(*loss.node);
        loss.node->grad[0] += T(1);
        for (std::size_t i = entries_.size(); i-- > 0;) {
            Entry& e = entries_[i];
            if (!e.output->grad.empty()) e.pull();
        }
    }

private:
    struct Entry {
        std::shared_ptr<TensorNode<T>> output;
        std::function<void()> pull;
    };
    static std::vector<Tape*>& stack() {
        thread_local std::vector<Tape*> s;
        return s;
    }
    std::vector<Entry> entries_;
};

namespace detail {

// c[m,n] += a[m,k] * b[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        const T* arow = a + m * K;
        T* crow = c + m * N;
        for (std::size_t k = 0; k < K; ++k) {
            const T av = arow[k];
            const T* brow = b + k * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += av * brow[n];
        }
    }
}

// c[m,k] += sum_n a[m,n] * b[k,n]   (a * b^T)
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t M, std::size_t N, std::size_t K) {
    for (std::size_t m = 0; m < M; ++m) {
        const T* arow = a + m * N;
        T* crow = c + m * K;
        for (std::size_t k = 0; k < K; ++k) {
            const T* brow = b + k * N;
            T acc = T(0);
            for (std::size_t n = 0; n < N; ++n) acc += arow[n] * brow[n];
            crow[k] += acc;
        }
    }
}

// c[k,n] += sum_m a[m,k] * b[m,n]   (a^T * b)
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t m = 0; m < M; ++m) {
        const T* arow = a + m * K;
        const T* brow = b + m * N;
        for (std::size_t k = 0; k < K; ++k) {
            const T av = arow[k];
            T* crow = c + k * N;
            for (std::size_t n = 0; n < N; ++n) crow[n] += av * brow[n];
        }
    }
}

struct MatmulDims {
    std::size_t batch, M, K, N;
    bool a_batched, b_batched;
    std::vector<std::size_t> out_shape;
};

inline MatmulDims matmul_dims(const std::vector<std::size_t>& sa,
                              const std::vector<std::size_t>& sb) {
    if (sa.size() < 2 || sb.size() < 2)
        throw ShapeError(msg("matmul: operands must have rank >= 2, got ",
                             shape_str(sa), " x ", shape_str(sb)));
    MatmulDims d;
    d.M = sa[sa.size() - 2];
    d.K = sa[sa.size() - 1];
    const std::size_t K2 = sb[sb.size() - 2];
    d.N = sb[sb.size() - 1];
    if (d.K != K2)
        throw ShapeError(msg("matmul: inner extents disagree, ", shape_str(sa),
                             " x ", shape_str(sb)));
    d.a_batched = sa.size() > 2;
    d.b_batched = sb.size() > 2;
    std::vector<std::size_t> prefix;
    if (d.a_batched && d.b_batched) {
        if (sa.size() != sb.size() ||
            !std::equal(sa.begin(), sa.end() - 2, sb.begin()))
            throw ShapeError(msg("matmul: batch prefixes disagree, ", shape_str(sa),
                                 " x ", shape_str(sb)));
        prefix.assign(sa.begin(), sa.end() - 2);
    } else if (d.a_batched) {
        prefix.assign(sa.begin(), sa.end() - 2);
    } else if (d.b_batched) {
        prefix.assign(sb.begin(), sb.end() - 2);
    }
    d.batch = numel_of(prefix);
    d.out_shape = prefix;
    d.out_shape.push_back(d.M);
    d.out_shape.push_back(d.N);
    return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable operations
// ---------------------------------------------------------------------------

// Matrix product over the last two axes. Batch prefixes must agree, or the
// rank-2 operand is broadcast across the other operand's batch.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const auto d = detail::matmul_dims(a.shape(), b.shape());
    Tensor<T> out = Tensor<T>::zeros(d.out_shape);
    const std::size_t a_step = d.a_batched ? d.M * d.K : 0;
    const std::size_t b_step = d.b_batched ? d.K * d.N : 0;
    for (std::size_t i = 0; i < d.batch; ++i)
        detail::gemm_nn(a.data() + i * a_step, b.data() + i * b_step,
                        out.data() + i * d.M * d.N, d.M, d.K, d.N);
    maybe_check_finite(out, "matmul");

    if (Tape<T>* tape = Tape<T>::active()) {
        auto an = a.node, bn = b.node, on = out.node;
        tape->record(on, [an, bn, on, d] {
            ensure_grad(*an);
            ensure_grad(*bn);
            const std::size_t a_step = d.a_batched ? d.M * d.K : 0;
            const std::size_t b_step = d.b_batched ? d.K * d.N : 0;
            for (std::size_t i = 0; i < d.batch; ++i) {
                const T* go = on->grad.data() + i * d.M * d.N;
                detail::gemm_nt(go, bn->value.data() + i * b_step,
                                an->grad.data() + i * a_step, d.M, d.N, d.K);
                detail::gemm_tn(an->value.data() + i * a_step, go,
                                bn->grad.data() + i * b_step, d.M, d.K, d.N);
            }
        });
    }
    return out;
}

// Swap the last two axes.
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
    if (x.rank() < 2)
        throw ShapeError(msg("transpose_last2: rank must be >= 2, got shape ",
                             shape_str(x.shape())));
    std::vector<std::size_t> out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    const std::size_t A = x.shape()[x.rank() - 2];
    const std::size_t B = x.shape()[x.rank() - 1];
    const std::size_t batch = x.numel() / (A * B);

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    const T* in = x.data();
    T* o = out.data();
    for (std::size_t n = 0; n < batch; ++n) {
        const T* src = in + n * A * B;
        T* dst = o + n * A * B;
        for (std::size_t i = 0; i < A; ++i)
            for (std::size_t j = 0; j < B; ++j) dst[j * A + i] = src[i * B + j];
    }

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, on = out.node;
        tape->record(on, [xn, on, batch, A, B] {
            ensure_grad(*xn);
            for (std::size_t n = 0; n < batch; ++n) {
                const T* g = on->grad.data() + n * A * B;
                T* gi = xn->grad.data() + n * A * B;
                for (std::size_t j = 0; j < B; ++j)
                    for (std::size_t i = 0; i < A; ++i) gi[i * B + j] += g[j * A + i];
            }
        });
    }
    return out;
}

// Same flat data, new shape metadata.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<std::size_t> new_shape) {
    if (numel_of(new_shape) != x.numel())
        throw ShapeError(msg("reshape: cannot view ", shape_str(x.shape()), " as ",
                             shape_str(new_shape), " (element counts differ)"));
    Tensor<T> out = Tensor<T>::from_data(std::move(new_shape), x.values());

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, on = out.node;
        tape->record(on, [xn, on] {
            ensure_grad(*xn);
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

namespace detail {
template <typename T>
void require_same_shape(const Tensor<T>& x, const Tensor<T>& y, const char* op) {
    if (x.shape() != y.shape())
        throw ShapeError(msg(op, ": shapes disagree, ", shape_str(x.shape()), " vs ",
                             shape_str(y.shape())));
}
}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& x, const Tensor<T>& y) {
    detail::require_same_shape(x, y, "add");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] + y.data()[i];
    maybe_check_finite(out, "add");
    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, yn = y.node, on = out.node;
        tape->record(on, [xn, yn, on] {
            ensure_grad(*xn);
            ensure_grad(*yn);
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                xn->grad[i] += on->grad[i];
                yn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& x, const Tensor<T>& y) {
    detail::require_same_shape(x, y, "sub");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] - y.data()[i];
    maybe_check_finite(out, "sub");
    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, yn = y.node, on = out.node;
        tape->record(on, [xn, yn, on] {
            ensure_grad(*xn);
            ensure_grad(*yn);
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                xn->grad[i] += on->grad[i];
                yn->grad[i] -= on->grad[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& x, const Tensor<T>& y) {
    detail::require_same_shape(x, y, "mul");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * y.data()[i];
    maybe_check_finite(out, "mul");
    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, yn = y.node, on = out.node;
        tape->record(on, [xn, yn, on] {
            ensure_grad(*xn);
            ensure_grad(*yn);
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                xn->grad[i] += on->grad[i] * yn->value[i];
                yn->grad[i] += on->grad[i] * xn->value[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * c;
    maybe_check_finite(out, "scale");
    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, on = out.node;
        tape->record(on, [xn, on, c] {
            ensure_grad(*xn);
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * c;
        });
    }
    return out;
}

// Exact Gaussian-CDF GELU: x * Phi(x), Phi via erf.
template <typename T>
T gelu_value(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

// d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
template <typename T>
T gelu_derivative(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
    const T pdf = T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
    return cdf + x * pdf;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = gelu_value(x.data()[i]);
    maybe_check_finite(out, "gelu");
    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, on = out.node;
        tape->record(on, [xn, on] {
            ensure_grad(*xn);
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] * gelu_derivative(xn->value[i]);
        });
    }
    return out;
}

// x[.., W] + bias[W], broadcast over all leading axes.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
    if (x.rank() < 1 || bias.rank() != 1 || bias.shape()[0] != x.shape()[x.rank() - 1])
        throw ShapeError(msg("add_bias: bias ", shape_str(bias.shape()),
                             " does not match last axis of ", shape_str(x.shape())));
    const std::size_t W = bias.shape()[0];
    const std::size_t rows = x.numel() / W;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < W; ++i)
            out.data()[r * W + i] = x.data()[r * W + i] + bias.data()[i];
    maybe_check_finite(out, "add_bias");
    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, bn = bias.node, on = out.node;
        tape->record(on, [xn, bn, on, rows, W] {
            ensure_grad(*xn);
            ensure_grad(*bn);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t i = 0; i < W; ++i) {
                    xn->grad[r * W + i] += on->grad[r * W + i];
                    bn->grad[i] += on->grad[r * W + i];
                }
        });
    }
    return out;
}

enum class Reduce { mean, sum, max };

// Removes `axis`. mean/sum distribute gradient; max routes it to the first
// maximal element.
template <typename T>
Tensor<T> reduce(const Tensor<T>& x, std::size_t axis, Reduce kind) {
    if (axis >= x.rank())
        throw ShapeError(msg("reduce: axis ", axis, " out of range for shape ",
                             shape_str(x.shape())));
    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < x.rank(); ++i)
        if (i != axis) out_shape.push_back(x.shape()[i]);
    const std::size_t extent = x.shape()[axis];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    std::vector<std::size_t> argmax;
    if (kind == Reduce::max) argmax.assign(outer * inner, 0);

    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * extent * inner + i;
            if (kind == Reduce::max) {
                T best = x.data()[base];
                std::size_t best_j = 0;
                for (std::size_t j = 1; j < extent; ++j) {
                    const T v = x.data()[base + j * inner];
                    if (v > best) best = v, best_j = j;
                }
                out.data()[o * inner + i] = best;
                argmax[o * inner + i] = best_j;
            } else {
                T acc = T(0);
                for (std::size_t j = 0; j < extent; ++j) acc += x.data()[base + j * inner];
                out.data()[o * inner + i] = kind == Reduce::mean ? acc / T(extent) : acc;
            }
        }

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, on = out.node;
        tape->record(on, [xn, on, outer, inner, extent, kind, argmax = std::move(argmax)] {
            ensure_grad(*xn);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < inner; ++i) {
                    const T g = on->grad[o * inner + i];
                    const std::size_t base = o * extent * inner + i;
                    switch (kind) {
                        case Reduce::mean:
                            for (std::size_t j = 0; j < extent; ++j)
                                xn->grad[base + j * inner] += g / T(extent);
                            break;
                        case Reduce::sum:
                            for (std::size_t j = 0; j < extent; ++j)
                                xn->grad[base + j * inner] += g;
                            break;
                        case Reduce::max:
                            xn->grad[base + argmax[o * inner + i] * inner] += g;
                            break;
                    }
                }
        });
    }
    return out;
}

// Scalar sum of all elements.
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    return reduce(reshape(x, {x.numel()}), 0, Reduce::sum);
}

}  // namespace asmrh
