// SPDX-License-Identifier: Apache-2.0
//
// Packed, cache-blocked GEMM. A panels are packed into MR-row strips and B
// panels into NR-column strips; a register-tiled micro-kernel built on GCC
// vector extensions accumulates one MR x NR tile per call.
#include "gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace dsan::detail {
namespace {

constexpr std::size_t kVectorBytes = 64;

template <typename T>
struct Blocking {
    using Vec [[gnu::vector_size(kVectorBytes)]] = T;
    static constexpr std::size_t lanes = kVectorBytes / sizeof(T);
    static constexpr std::size_t mr = 8;
    static constexpr std::size_t nr = 2 * lanes;
    static constexpr std::size_t kc = 256;
    static constexpr std::size_t mc = 96;
    static constexpr std::size_t nc = 2048;
};

template <typename T>
using Vec = typename Blocking<T>::Vec;

template <typename T>
inline Vec<T> load(const T* p)
{
    Vec<T> v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

template <typename T>
inline void store(T* p, Vec<T> v)
{
    std::memcpy(p, &v, sizeof(v));
}

// tile[mr][nr] = sum_k a_strip[k][:] (x) b_strip[k][:]
template <typename T>
void micro_kernel(std::size_t kc, const T* __restrict a, const T* __restrict b, T* __restrict tile)
{
    constexpr std::size_t mr = Blocking<T>::mr;
    constexpr std::size_t lanes = Blocking<T>::lanes;
    Vec<T> acc0[mr] = {};
    Vec<T> acc1[mr] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        const Vec<T> b0 = load(b);
        const Vec<T> b1 = load(b + lanes);
        for (std::size_t i = 0; i < mr; ++i) {
            const T ai = a[i];
            acc0[i] += ai * b0;
            acc1[i] += ai * b1;
        }
        a += mr;
        b += 2 * lanes;
    }
    for (std::size_t i = 0; i < mr; ++i) {
        store(tile + i * 2 * lanes, acc0[i]);
        store(tile + i * 2 * lanes + lanes, acc1[i]);
    }
}

// As micro_kernel, reading B rows in place (row stride ldb) instead of a packed strip.
template <typename T>
void micro_kernel_direct_b(std::size_t kc, const T* __restrict a, const T* __restrict b,
                           std::size_t ldb, T* __restrict tile)
{
    constexpr std::size_t mr = Blocking<T>::mr;
    constexpr std::size_t lanes = Blocking<T>::lanes;
    Vec<T> acc0[mr] = {};
    Vec<T> acc1[mr] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        const Vec<T> b0 = load(b);
        const Vec<T> b1 = load(b + lanes);
        for (std::size_t i = 0; i < mr; ++i) {
            const T ai = a[i];
            acc0[i] += ai * b0;
            acc1[i] += ai * b1;
        }
        a += mr;
        b += ldb;
    }
    for (std::size_t i = 0; i < mr; ++i) {
        store(tile + i * 2 * lanes, acc0[i]);
        store(tile + i * 2 * lanes + lanes, acc1[i]);
    }
}

// c[i][j] = alpha * tile[i][j] + beta * c[i][j] over a full MR x NR tile;
// beta == 0 never reads c.
template <typename T>
inline void write_tile(const T* tile, T* c, std::size_t ldc, T alpha, T beta)
{
    constexpr std::size_t mr = Blocking<T>::mr;
    constexpr std::size_t lanes = Blocking<T>::lanes;
    for (std::size_t i = 0; i < mr; ++i) {
        T* crow = c + i * ldc;
        for (std::size_t h = 0; h < 2; ++h) {
            Vec<T> v = load(tile + i * 2 * lanes + h * lanes);
            if (alpha != T(1))
                v *= alpha;
            if (beta != T(0))
                v += beta * load(crow + h * lanes);
            store(crow + h * lanes, v);
        }
    }
}

template <typename T>
inline void write_partial_tile(const T* tile, T* c, std::size_t ldc, std::size_t rows,
                               std::size_t cols, T alpha, T beta)
{
    constexpr std::size_t nr = Blocking<T>::nr;
    for (std::size_t i = 0; i < rows; ++i) {
        T* crow = c + i * ldc;
        const T* trow = tile + i * nr;
        if (beta == T(0)) {
            for (std::size_t j = 0; j < cols; ++j)
                crow[j] = alpha * trow[j];
        } else {
            for (std::size_t j = 0; j < cols; ++j)
                crow[j] = alpha * trow[j] + beta * crow[j];
        }
    }
}

// Packs op(A)[i0:i0+mc, p0:p0+kc] into MR strips, zero-filling the tail.
template <typename T>
void pack_a(const T* a, std::size_t lda, bool trans, std::size_t i0, std::size_t mc,
            std::size_t p0, std::size_t kc, T* out)
{
    constexpr std::size_t mr = Blocking<T>::mr;
    for (std::size_t is = 0; is < mc; is += mr) {
        const std::size_t rows = std::min(mr, mc - is);
        if (rows < mr)
            std::fill(out, out + mr * kc, T(0));
        if (trans) {
            for (std::size_t p = 0; p < kc; ++p) {
                const T* src = a + (p0 + p) * lda + i0 + is;
                for (std::size_t i = 0; i < rows; ++i)
                    out[p * mr + i] = src[i];
            }
        } else {
            for (std::size_t i = 0; i < rows; ++i) {
                const T* src = a + (i0 + is + i) * lda + p0;
                for (std::size_t p = 0; p < kc; ++p)
                    out[p * mr + i] = src[p];
            }
        }
        out += mr * kc;
    }
}

template <typename T>
void pack_b(const T* b, std::size_t ldb, bool trans, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t nc, T* out)
{
    constexpr std::size_t nr = Blocking<T>::nr;
    for (std::size_t js = 0; js < nc; js += nr) {
        const std::size_t cols = std::min(nr, nc - js);
        if (cols < nr)
            std::fill(out, out + nr * kc, T(0));
        if (trans) {
            for (std::size_t j = 0; j < cols; ++j) {
                const T* src = b + (j0 + js + j) * ldb + p0;
                for (std::size_t p = 0; p < kc; ++p)
                    out[p * nr + j] = src[p];
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p) {
                const T* src = b + (p0 + p) * ldb + j0 + js;
                std::memcpy(out + p * nr, src, cols * sizeof(T));
            }
        }
        out += nr * kc;
    }
}

constexpr std::size_t kDirectBRows = 32;

template <typename T>
struct Workspace {
    std::vector<T> a;
    std::vector<T> b;
    std::vector<T> tail;
};

template <typename T>
Workspace<T>& workspace()
{
    thread_local Workspace<T> ws;
    return ws;
}

// Zero-padded NR-wide strip for the ragged last columns of a direct-B panel.
template <typename T>
const T* packed_tail(const T* b, std::size_t ldb, std::size_t p0, std::size_t kc, std::size_t j,
                     std::size_t cols, Workspace<T>& ws)
{
    constexpr std::size_t nr = Blocking<T>::nr;
    ws.tail.assign(kc * nr, T(0));
    for (std::size_t p = 0; p < kc; ++p)
        std::memcpy(ws.tail.data() + p * nr, b + (p0 + p) * ldb + j, cols * sizeof(T));
    return ws.tail.data();
}

template <typename T>
inline T hsum(Vec<T> v)
{
    T lane[Blocking<T>::lanes];
    std::memcpy(lane, &v, sizeof(v));
    T s = T(0);
    for (T x : lane)
        s += x;
    return s;
}

// sum[r][s] += a[r][p0:pe] . b[s][p0:pe] for a 4 x 4 block of rows.
template <typename T>
void dot_block(const T* const* a, const T* const* b, std::size_t p0, std::size_t pe,
               T (&sum)[4][4])
{
    constexpr std::size_t lanes = Blocking<T>::lanes;
    Vec<T> c00{}, c01{}, c02{}, c03{}, c10{}, c11{}, c12{}, c13{};
    Vec<T> c20{}, c21{}, c22{}, c23{}, c30{}, c31{}, c32{}, c33{};
    const T *a0 = a[0], *a1 = a[1], *a2 = a[2], *a3 = a[3];
    const T *b0 = b[0], *b1 = b[1], *b2 = b[2], *b3 = b[3];
    std::size_t p = p0;
    for (; p + lanes <= pe; p += lanes) {
        const Vec<T> x0 = load(a0 + p), x1 = load(a1 + p), x2 = load(a2 + p), x3 = load(a3 + p);
        Vec<T> y = load(b0 + p);
        c00 += x0 * y, c10 += x1 * y, c20 += x2 * y, c30 += x3 * y;
        y = load(b1 + p);
        c01 += x0 * y, c11 += x1 * y, c21 += x2 * y, c31 += x3 * y;
        y = load(b2 + p);
        c02 += x0 * y, c12 += x1 * y, c22 += x2 * y, c32 += x3 * y;
        y = load(b3 + p);
        c03 += x0 * y, c13 += x1 * y, c23 += x2 * y, c33 += x3 * y;
    }
    const Vec<T> acc[4][4] = {{c00, c01, c02, c03}, {c10, c11, c12, c13},
                              {c20, c21, c22, c23}, {c30, c31, c32, c33}};
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t s = 0; s < 4; ++s) {
            T part = hsum<T>(acc[r][s]);
            for (std::size_t q = p; q < pe; ++q)
                part += a[r][q] * b[s][q];
            sum[r][s] += part;
        }
}

// C = alpha * A * B^T + beta * C with A and B both row-major along K. Each
// entry is a dot product of two contiguous rows, so nothing is packed; a 4x4
// block of rows shares loads, and K is split into chunks that stay in L1.
template <typename T>
void gemm_dot(std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, std::size_t lda,
              const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc)
{
    constexpr std::size_t tr = 4;
    constexpr std::size_t chunk = 1024 * 4 / sizeof(T);
    // K chunks run outermost so the A rows of a chunk stay cached across all B rows.
    for (std::size_t p0 = 0; p0 < k; p0 += chunk) {
        const std::size_t pe = std::min(k, p0 + chunk);
        for (std::size_t i0 = 0; i0 < m; i0 += tr) {
            const std::size_t rows = std::min(tr, m - i0);
            for (std::size_t j0 = 0; j0 < n; j0 += tr) {
                const std::size_t cols = std::min(tr, n - j0);
                // Ragged blocks repeat their last row; the duplicates are never stored.
                const T* ar[tr];
                const T* br[tr];
                for (std::size_t r = 0; r < tr; ++r) {
                    ar[r] = a + (i0 + std::min(r, rows - 1)) * lda;
                    br[r] = b + (j0 + std::min(r, cols - 1)) * ldb;
                }
                T sum[tr][tr] = {};
                dot_block(ar, br, p0, pe, sum);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t s = 0; s < cols; ++s) {
                        T& dst = c[(i0 + r) * ldc + j0 + s];
                        if (p0 > 0)
                            dst += alpha * sum[r][s];
                        else
                            dst = alpha * sum[r][s] + (beta == T(0) ? T(0) : beta * dst);
                    }
            }
        }
    }
}

} // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc)
{
    using B = Blocking<T>;
    if (m == 0 || n == 0)
        return;
    if (k == 0 || alpha == T(0)) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                c[i * ldc + j] = beta == T(0) ? T(0) : beta * c[i * ldc + j];
        return;
    }
    if (!trans_a && trans_b) {
        gemm_dot(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
        return;
    }

    auto& ws = workspace<T>();
    ws.a.resize(((B::mc + B::mr - 1) / B::mr) * B::mr * B::kc);
    ws.b.resize(((B::nc + B::nr - 1) / B::nr) * B::nr * B::kc);
    alignas(64) T tile[B::mr * B::nr];

    for (std::size_t j0 = 0; j0 < n; j0 += B::nc) {
        const std::size_t nc = std::min(B::nc, n - j0);
        for (std::size_t p0 = 0; p0 < k; p0 += B::kc) {
            const std::size_t kc = std::min(B::kc, k - p0);
            const T beta_eff = p0 == 0 ? beta : T(1);
            // With few A rows every B element is used only a couple of times, so
            // packing costs more than it saves; full B panels are then read in place.
            const bool direct_b = !trans_b && m <= kDirectBRows;
            if (!direct_b)
                pack_b(b, ldb, trans_b, p0, kc, j0, nc, ws.b.data());
            for (std::size_t i0 = 0; i0 < m; i0 += B::mc) {
                const std::size_t mc = std::min(B::mc, m - i0);
                pack_a(a, lda, trans_a, i0, mc, p0, kc, ws.a.data());
                for (std::size_t js = 0; js < nc; js += B::nr) {
                    const std::size_t cols = std::min(B::nr, nc - js);
                    const T* bp = ws.b.data() + (js / B::nr) * B::nr * kc;
                    for (std::size_t is = 0; is < mc; is += B::mr) {
                        const std::size_t rows = std::min(B::mr, mc - is);
                        const T* ap = ws.a.data() + (is / B::mr) * B::mr * kc;
                        if (direct_b && cols == B::nr)
                            micro_kernel_direct_b(kc, ap, b + p0 * ldb + j0 + js, ldb, tile);
                        else if (direct_b)
                            micro_kernel(kc, ap, packed_tail(b, ldb, p0, kc, j0 + js, cols, ws), tile);
                        else
                            micro_kernel(kc, ap, bp, tile);
                        T* cblk = c + (i0 + is) * ldc + j0 + js;
                        if (rows == B::mr && cols == B::nr)
                            write_tile<T>(tile, cblk, ldc, alpha, beta_eff);
                        else
                            write_partial_tile<T>(tile, cblk, ldc, rows, cols, alpha, beta_eff);
                    }
                }
            }
        }
    }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                          std::size_t, const float*, std::size_t, float, float*, std::size_t);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, double,
                           const double*, std::size_t, const double*, std::size_t, double,
                           double*, std::size_t);

} // namespace dsan::detail
