#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "asmrh/tensor.hpp"

// Real/Hermitian discrete Fourier transforms with fixed conventions:
// forward transforms are unnormalized with kernel exp(-2*pi*i*k*t/n),
// inverses carry the 1/n factor with kernel exp(+2*pi*i*k*t/n).
//
// hfft treats its (real) input as the first floor(n/2)+1 coefficients of a
// Hermitian spectrum: the input is trimmed or zero-padded to that length,
// mirrored into a full conjugate-symmetric spectrum (Nyquist forced real
// for even n) and transformed. The result is real by construction; the
// imaginary residue is asserted to be <= 1e-9 * ||input|| and discarded.
// irfft is the 1/n-normalized partner with the same extension rule.

namespace asmrh::spectral {

using cplx = std::complex<double>;

struct SpectralPlan {
    enum class Direction { hfft, ihfft, rfft, irfft };

    std::size_t n;  // signal length
    std::size_t m;  // half-spectrum length, floor(n/2)+1
    Direction direction;

    SpectralPlan(std::size_t n_, Direction d);
};

// O(n^2) definition, double precision. Oracle and reference only.
std::vector<cplx> dft_naive(const std::vector<cplx>& x, int sign);

// Radix-2 for powers of two, Bluestein (chirp-z) otherwise.
std::vector<cplx> fft(std::vector<cplx> x, int sign);

std::vector<cplx> hermitian_extend(const std::vector<cplx>& half, std::size_t n);

std::vector<double> hfft(const std::vector<double>& y, std::size_t n);
std::vector<double> ihfft(const std::vector<double>& z, std::size_t n);
std::vector<cplx> rfft(const std::vector<double>& x);
std::vector<double> irfft(const std::vector<cplx>& y, std::size_t n);
std::vector<double> irfft(const std::vector<double>& y, std::size_t n);

// Adjoints of the real linear maps above, including the trim/pad step
// (its adjoint is pad/trim). input_len is the forward input's length.
std::vector<double> hfft_adjoint(const std::vector<double>& grad_out,
                                 std::size_t input_len, std::size_t n);
std::vector<double> irfft_adjoint(const std::vector<double>& grad_out,
                                  std::size_t input_len, std::size_t n);

// Row-batched forms over contiguous buffers (each row transformed as 1-D).
void hfft_rows(const double* in, std::size_t rows, std::size_t in_len,
               std::size_t n, double* out);
void irfft_rows(const double* in, std::size_t rows, std::size_t in_len,
                std::size_t n, double* out);
void hfft_adjoint_rows(const double* grad_out, std::size_t rows,
                       std::size_t input_len, std::size_t n, double* grad_in);
void irfft_adjoint_rows(const double* grad_out, std::size_t rows,
                        std::size_t input_len, std::size_t n, double* grad_in);

}  // namespace asmrh::spectral

namespace asmrh {

namespace detail {

enum class SpectralKind { hfft, irfft };

template <typename T>
Tensor<T> spectral_last_axis(const Tensor<T>& x, std::size_t n, SpectralKind kind) {
    if (x.rank() < 1)
        throw ShapeError("spectral op: input must have rank >= 1");
    if (n < 2)
        throw ShapeError(msg("spectral op: output length n must be >= 2, got ", n));
    const std::size_t in_len = x.shape()[x.rank() - 1];
    const std::size_t rows = x.numel() / in_len;
    std::vector<std::size_t> out_shape = x.shape();
    out_shape.back() = n;

    std::vector<double> in_d(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) in_d[i] = static_cast<double>(x.data()[i]);
    std::vector<double> out_d(rows * n);
    if (kind == SpectralKind::hfft)
        spectral::hfft_rows(in_d.data(), rows, in_len, n, out_d.data());
    else
        spectral::irfft_rows(in_d.data(), rows, in_len, n, out_d.data());

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    for (std::size_t i = 0; i < out_d.size(); ++i) out.data()[i] = static_cast<T>(out_d[i]);
    maybe_check_finite(out, kind == SpectralKind::hfft ? "hfft" : "irfft");

    if (Tape<T>* tape = Tape<T>::active()) {
        auto xn = x.node, on = out.node;
        tape->record(on, [xn, on, rows, in_len, n, kind] {
            ensure_grad(*xn);
            std::vector<double> g(on->grad.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(on->grad[i]);
            std::vector<double> gi(rows * in_len);
            if (kind == SpectralKind::hfft)
                spectral::hfft_adjoint_rows(g.data(), rows, in_len, n, gi.data());
            else
                spectral::irfft_adjoint_rows(g.data(), rows, in_len, n, gi.data());
            for (std::size_t i = 0; i < gi.size(); ++i) xn->grad[i] += static_cast<T>(gi[i]);
        });
    }
    return out;
}

}  // namespace detail

// Hermitian FFT along the last axis; output's last extent becomes n.
template <typename T>
Tensor<T> hfft_last(const Tensor<T>& x, std::size_t n) {
    return detail::spectral_last_axis(x, n, detail::SpectralKind::hfft);
}

// Inverse real FFT along the last axis; output's last extent becomes n.
template <typename T>
Tensor<T> irfft_last(const Tensor<T>& x, std::size_t n) {
    return detail::spectral_last_axis(x, n, detail::SpectralKind::irfft);
}

}  // namespace asmrh
