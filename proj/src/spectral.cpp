#include "asmrh/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "asmrh/errors.hpp"

namespace asmrh::spectral {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2. Twiddles are indexed off a per-call table so
// stage error does not compound through repeated multiplication.
void fft_pow2(cplx* a, std::size_t n, int sign) {
    if (n < 2) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    std::vector<cplx> tw(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
        const double ang = sign * 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
        tw[j] = cplx(std::cos(ang), std::sin(ang));
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx w = tw[j * stride];
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
    }
}

// Chirp-z for arbitrary n via a power-of-two circular convolution.
void fft_bluestein(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    std::vector<cplx> chirp(n);
    for (std::size_t j = 0; j < n; ++j) {
        // j^2 mod 2n keeps the trig argument small
        const std::uint64_t j2 = (static_cast<std::uint64_t>(j) * j) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(j2) / static_cast<double>(n);
        chirp[j] = cplx(std::cos(ang), std::sin(ang));
    }
    const std::size_t L = next_pow2(2 * n - 1);
    std::vector<cplx> va(L, cplx(0, 0)), vb(L, cplx(0, 0));
    for (std::size_t j = 0; j < n; ++j) va[j] = a[j] * chirp[j];
    vb[0] = std::conj(chirp[0]);
    for (std::size_t t = 1; t < n; ++t) vb[t] = vb[L - t] = std::conj(chirp[t]);
    fft_pow2(va.data(), L, -1);
    fft_pow2(vb.data(), L, -1);
    for (std::size_t i = 0; i < L; ++i) va[i] *= vb[i];
    fft_pow2(va.data(), L, +1);
    const double inv_l = 1.0 / static_cast<double>(L);
    for (std::size_t k = 0; k < n; ++k) a[k] = chirp[k] * (va[k] * inv_l);
}

void fft_inplace(std::vector<cplx>& a, int sign) {
    if (a.size() <= 1) return;
    if (is_pow2(a.size()))
        fft_pow2(a.data(), a.size(), sign);
    else
        fft_bluestein(a, sign);
}

std::size_t half_len(std::size_t n) { return n / 2 + 1; }

// Trim or zero-pad to the half-spectrum length m = floor(n/2)+1.
std::vector<double> adjust_half(const double* y, std::size_t len, std::size_t n) {
    const std::size_t m = half_len(n);
    std::vector<double> out(m, 0.0);
    std::copy(y, y + std::min(len, m), out.begin());
    return out;
}

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void check_realness(const std::vector<cplx>& x, double input_norm, const char* op) {
    double worst = 0.0;
    for (const cplx& v : x) worst = std::max(worst, std::abs(v.imag()));
    if (worst > 1e-9 * input_norm)
        throw NumericError(msg(op, ": imaginary residue ", worst,
                               " exceeds 1e-9 * ||input|| = ", 1e-9 * input_norm));
}

// Core adjoint shared by hfft/irfft: the forward map, written on the real
// half-spectrum coefficients, is out_t = y_0 + 2*sum_k y_k cos(2 pi k t/n)
// (+ (-1)^t * y_{n/2} for even n), so the adjoint columns are cosines and
// read off the real part of a DFT of the output gradient.
std::vector<double> cosine_adjoint(const std::vector<double>& grad_out,
                                   std::size_t input_len, std::size_t n) {
    if (grad_out.size() != n)
        throw ShapeError(msg("spectral adjoint: gradient length ", grad_out.size(),
                             " does not match n = ", n));
    const std::size_t m = half_len(n);
    std::vector<cplx> g(n);
    for (std::size_t t = 0; t < n; ++t) g[t] = cplx(grad_out[t], 0.0);
    fft_inplace(g, -1);
    std::vector<double> core(m);
    for (std::size_t k = 0; k < m; ++k) {
        const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
        core[k] = (edge ? 1.0 : 2.0) * g[k].real();
    }
    std::vector<double> out(input_len, 0.0);
    for (std::size_t k = 0; k < std::min(input_len, m); ++k) out[k] = core[k];
    return out;
}

}  // namespace

SpectralPlan::SpectralPlan(std::size_t n_, Direction d) : n(n_), m(half_len(n_)), direction(d) {
    if (n < 2) throw ShapeError(msg("SpectralPlan: transform length must be >= 2, got ", n));
}

std::vector<cplx> dft_naive(const std::vector<cplx>& x, int sign) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n, cplx(0, 0));
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc(0, 0);
        for (std::size_t j = 0; j < n; ++j) {
            const std::uint64_t jk = (static_cast<std::uint64_t>(j) * k) % n;
            const double ang = sign * 2.0 * kPi * static_cast<double>(jk) / static_cast<double>(n);
            acc += x[j] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<cplx> fft(std::vector<cplx> x, int sign) {
    fft_inplace(x, sign);
    return x;
}

std::vector<cplx> hermitian_extend(const std::vector<cplx>& half, std::size_t n) {
    const std::size_t m = half_len(n);
    if (half.size() != m)
        throw ShapeError(msg("hermitian_extend: expected ", m, " coefficients for n = ", n,
                             ", got ", half.size()));
    std::vector<cplx> ext(n, cplx(0, 0));
    ext[0] = cplx(half[0].real(), 0.0);  // DC is real
    for (std::size_t k = 1; k < m; ++k) {
        if (n % 2 == 0 && k == n / 2) {
            ext[k] = cplx(half[k].real(), 0.0);  // Nyquist taken as real
        } else {
            ext[k] = half[k];
            ext[n - k] = std::conj(half[k]);
        }
    }
    return ext;
}

std::vector<double> hfft(const std::vector<double>& y, std::size_t n) {
    std::vector<double> out(n);
    hfft_rows(y.data(), 1, y.size(), n, out.data());
    return out;
}

std::vector<double> ihfft(const std::vector<double>& z, std::size_t n) {
    if (n < 2) throw ShapeError(msg("ihfft: length must be >= 2, got ", n));
    if (z.size() != n)
        throw ShapeError(msg("ihfft: input length ", z.size(), " does not match n = ", n));
    std::vector<cplx> zz(n);
    for (std::size_t t = 0; t < n; ++t) zz[t] = cplx(z[t], 0.0);
    fft_inplace(zz, +1);
    const std::size_t m = half_len(n);
    std::vector<double> out(m);
    // the half-spectrum of an hfft output is real; the imaginary component
    // is discarded
    for (std::size_t k = 0; k < m; ++k) out[k] = zz[k].real() / static_cast<double>(n);
    return out;
}

std::vector<cplx> rfft(const std::vector<double>& x) {
    std::vector<cplx> xx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xx[i] = cplx(x[i], 0.0);
    fft_inplace(xx, -1);
    xx.resize(half_len(x.size()));
    return xx;
}

std::vector<double> irfft(const std::vector<cplx>& y, std::size_t n) {
    if (n < 2) throw ShapeError(msg("irfft: output length must be >= 2, got ", n));
    const std::size_t m = half_len(n);
    std::vector<cplx> half(m, cplx(0, 0));
    std::copy(y.begin(), y.begin() + std::min(y.size(), m), half.begin());
    double norm = 0.0;
    for (const cplx& v : half) norm += std::norm(v);
    norm = std::sqrt(norm);
    std::vector<cplx> ext = hermitian_extend(half, n);
    fft_inplace(ext, +1);
    check_realness(ext, norm, "irfft");
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = ext[t].real() / static_cast<double>(n);
    return out;
}

std::vector<double> irfft(const std::vector<double>& y, std::size_t n) {
    std::vector<double> out(n);
    irfft_rows(y.data(), 1, y.size(), n, out.data());
    return out;
}

std::vector<double> hfft_adjoint(const std::vector<double>& grad_out, std::size_t input_len,
                                 std::size_t n) {
    return cosine_adjoint(grad_out, input_len, n);
}

std::vector<double> irfft_adjoint(const std::vector<double>& grad_out, std::size_t input_len,
                                  std::size_t n) {
    std::vector<double> out = cosine_adjoint(grad_out, input_len, n);
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

void hfft_rows(const double* in, std::size_t rows, std::size_t in_len, std::size_t n,
               double* out) {
    if (n < 2) throw ShapeError(msg("hfft: output length must be >= 2, got ", n));
    const std::size_t m = half_len(n);
    std::vector<cplx> ext;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> adj = adjust_half(in + r * in_len, in_len, n);
        std::vector<cplx> half(m);
        for (std::size_t k = 0; k < m; ++k) half[k] = cplx(adj[k], 0.0);
        ext = hermitian_extend(half, n);
        fft_inplace(ext, -1);
        check_realness(ext, l2_norm(adj), "hfft");
        for (std::size_t t = 0; t < n; ++t) out[r * n + t] = ext[t].real();
    }
}

void irfft_rows(const double* in, std::size_t rows, std::size_t in_len, std::size_t n,
                double* out) {
    if (n < 2) throw ShapeError(msg("irfft: output length must be >= 2, got ", n));
    const std::size_t m = half_len(n);
    std::vector<cplx> ext;
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> adj = adjust_half(in + r * in_len, in_len, n);
        std::vector<cplx> half(m);
        for (std::size_t k = 0; k < m; ++k) half[k] = cplx(adj[k], 0.0);
        ext = hermitian_extend(half, n);
        fft_inplace(ext, +1);
        check_realness(ext, l2_norm(adj), "irfft");
        for (std::size_t t = 0; t < n; ++t)
            out[r * n + t] = ext[t].real() / static_cast<double>(n);
    }
}

void hfft_adjoint_rows(const double* grad_out, std::size_t rows, std::size_t input_len,
                       std::size_t n, double* grad_in) {
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> g(grad_out + r * n, grad_out + (r + 1) * n);
        std::vector<double> gi = hfft_adjoint(g, input_len, n);
        for (std::size_t k = 0; k < input_len; ++k) grad_in[r * input_len + k] = gi[k];
    }
}

void irfft_adjoint_rows(const double* grad_out, std::size_t rows, std::size_t input_len,
                        std::size_t n, double* grad_in) {
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> g(grad_out + r * n, grad_out + (r + 1) * n);
        std::vector<double> gi = irfft_adjoint(g, input_len, n);
        for (std::size_t k = 0; k < input_len; ++k) grad_in[r * input_len + k] = gi[k];
    }
}

}  // namespace asmrh::spectral
