#include "ostr/kernels.hpp"

#include <algorithm>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ostr::kernels {

namespace {

int g_threads = 1;

inline int div_ceil(int a, int b) {  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
inline int div_floor(int a, int b) {  // b > 0
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

void set_threads(int n) { g_threads = std::max(1, n); }
int threads() { return g_threads; }

// ---------------------------------------------------------------------------
// conv2d
//
// Per output element the reduction order is (ci, ky, kx); the parallel and
// reference versions share it so their results are bit-identical.
// ---------------------------------------------------------------------------

namespace {

// One (n, co) output plane, axpy-style over the kernel taps: inner loop runs
// over contiguous output columns, which the compiler can vectorize without
// reordering any per-element sum.
inline void conv_plane_forward(const double* x, const double* w, double bias,
                               double* y, const Conv2dDims& d, int co) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int i = 0; i < oh * ow; ++i) y[i] = bias;
  for (int ci = 0; ci < d.cin; ++ci) {
    const double* xc = x + static_cast<std::int64_t>(ci) * d.h * d.w;
    const double* wc = w + (static_cast<std::int64_t>(co) * d.cin + ci) * d.k * d.k;
    for (int ky = 0; ky < d.k; ++ky) {
      const int oy_lo = std::max(0, div_ceil(d.pad - ky, d.stride));
      const int oy_hi = std::min(oh - 1, div_floor(d.h - 1 + d.pad - ky, d.stride));
      for (int kx = 0; kx < d.k; ++kx) {
        const double wv = wc[ky * d.k + kx];
        const int ox_lo = std::max(0, div_ceil(d.pad - kx, d.stride));
        const int ox_hi = std::min(ow - 1, div_floor(d.w - 1 + d.pad - kx, d.stride));
        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
          const int iy = oy * d.stride + ky - d.pad;
          double* yrow = y + static_cast<std::int64_t>(oy) * ow;
          const double* xrow = xc + static_cast<std::int64_t>(iy) * d.w + (kx - d.pad);
          if (d.stride == 1) {
            for (int ox = ox_lo; ox <= ox_hi; ++ox) yrow[ox] += wv * xrow[ox];
          } else {
            for (int ox = ox_lo; ox <= ox_hi; ++ox)
              yrow[ox] += wv * xrow[static_cast<std::int64_t>(ox) * d.stride];
          }
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const double* x, const double* w, const double* b, double* y,
                    const Conv2dDims& d) {
  const std::int64_t xplane = static_cast<std::int64_t>(d.cin) * d.h * d.w;
  const std::int64_t yplane = static_cast<std::int64_t>(d.out_h()) * d.out_w();
#pragma omp parallel for collapse(2) schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.cout; ++co) {
      conv_plane_forward(x + n * xplane, w, b ? b[co] : 0.0,
                         y + (static_cast<std::int64_t>(n) * d.cout + co) * yplane, d,
                         co);
    }
  }
}

void ref_conv2d_forward(const double* x, const double* w, const double* b, double* y,
                        const Conv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.cout; ++co) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b ? b[co] : 0.0;
          for (int ci = 0; ci < d.cin; ++ci) {
            for (int ky = 0; ky < d.k; ++ky) {
              const int iy = oy * d.stride + ky - d.pad;
              if (iy < 0 || iy >= d.h) continue;
              for (int kx = 0; kx < d.k; ++kx) {
                const int ix = ox * d.stride + kx - d.pad;
                if (ix < 0 || ix >= d.w) continue;
                acc += w[((static_cast<std::int64_t>(co) * d.cin + ci) * d.k + ky) *
                             d.k +
                         kx] *
                       x[((static_cast<std::int64_t>(n) * d.cin + ci) * d.h + iy) *
                             d.w +
                         ix];
              }
            }
          }
          y[((static_cast<std::int64_t>(n) * d.cout + co) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

// gx[n,ci,iy,ix] += sum over (co,ky,kx) of w[co,ci,ky,kx] * gy[n,co,oy,ox]
// where iy = oy*s + ky - p. Reduction order per element: (co, ky, kx).
namespace {

inline void conv_plane_grad_input(const double* gy, const double* w, double* gx,
                                  const Conv2dDims& d, int ci) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int co = 0; co < d.cout; ++co) {
    const double* gyc = gy + static_cast<std::int64_t>(co) * oh * ow;
    const double* wc = w + (static_cast<std::int64_t>(co) * d.cin + ci) * d.k * d.k;
    for (int ky = 0; ky < d.k; ++ky) {
      const int oy_lo = std::max(0, div_ceil(d.pad - ky, d.stride));
      const int oy_hi = std::min(oh - 1, div_floor(d.h - 1 + d.pad - ky, d.stride));
      for (int kx = 0; kx < d.k; ++kx) {
        const double wv = wc[ky * d.k + kx];
        const int ox_lo = std::max(0, div_ceil(d.pad - kx, d.stride));
        const int ox_hi = std::min(ow - 1, div_floor(d.w - 1 + d.pad - kx, d.stride));
        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
          const int iy = oy * d.stride + ky - d.pad;
          const double* gyrow = gyc + static_cast<std::int64_t>(oy) * ow;
          double* gxrow = gx + static_cast<std::int64_t>(iy) * d.w + (kx - d.pad);
          for (int ox = ox_lo; ox <= ox_hi; ++ox)
            gxrow[static_cast<std::int64_t>(ox) * d.stride] += wv * gyrow[ox];
        }
      }
    }
  }
}

}  // namespace

void conv2d_grad_input(const double* gy, const double* w, double* gx,
                       const Conv2dDims& d) {
  const std::int64_t gxplane = static_cast<std::int64_t>(d.h) * d.w;
  const std::int64_t gyimg =
      static_cast<std::int64_t>(d.cout) * d.out_h() * d.out_w();
#pragma omp parallel for collapse(2) schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.cin; ++ci) {
      conv_plane_grad_input(gy + n * gyimg, w,
                            gx + (static_cast<std::int64_t>(n) * d.cin + ci) * gxplane,
                            d, ci);
    }
  }
}

void ref_conv2d_grad_input(const double* gy, const double* w, double* gx,
                           const Conv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.cin; ++ci) {
      for (int co = 0; co < d.cout; ++co) {
        for (int ky = 0; ky < d.k; ++ky) {
          for (int kx = 0; kx < d.k; ++kx) {
            const double wv =
                w[((static_cast<std::int64_t>(co) * d.cin + ci) * d.k + ky) * d.k + kx];
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * d.stride + ky - d.pad;
              if (iy < 0 || iy >= d.h) continue;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * d.stride + kx - d.pad;
                if (ix < 0 || ix >= d.w) continue;
                gx[((static_cast<std::int64_t>(n) * d.cin + ci) * d.h + iy) * d.w +
                   ix] +=
                    wv *
                    gy[((static_cast<std::int64_t>(n) * d.cout + co) * oh + oy) * ow +
                       ox];
              }
            }
          }
        }
      }
    }
  }
}

// gw[co,ci,ky,kx] += sum over (n,oy,ox); gb[co] += sum over (n,oy,ox).
void conv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                        const Conv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (int co = 0; co < d.cout; ++co) {
    for (int ci = 0; ci < d.cin; ++ci) {
      for (int ky = 0; ky < d.k; ++ky) {
        for (int kx = 0; kx < d.k; ++kx) {
          double acc = 0.0;
          for (int n = 0; n < d.n; ++n) {
            const double* xc =
                x + (static_cast<std::int64_t>(n) * d.cin + ci) * d.h * d.w;
            const double* gyc =
                gy + (static_cast<std::int64_t>(n) * d.cout + co) * oh * ow;
            const int oy_lo = std::max(0, div_ceil(d.pad - ky, d.stride));
            const int oy_hi =
                std::min(oh - 1, div_floor(d.h - 1 + d.pad - ky, d.stride));
            const int ox_lo = std::max(0, div_ceil(d.pad - kx, d.stride));
            const int ox_hi =
                std::min(ow - 1, div_floor(d.w - 1 + d.pad - kx, d.stride));
            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
              const int iy = oy * d.stride + ky - d.pad;
              const double* xrow =
                  xc + static_cast<std::int64_t>(iy) * d.w + (kx - d.pad);
              const double* gyrow = gyc + static_cast<std::int64_t>(oy) * ow;
              for (int ox = ox_lo; ox <= ox_hi; ++ox)
                acc += xrow[static_cast<std::int64_t>(ox) * d.stride] * gyrow[ox];
            }
          }
          gw[((static_cast<std::int64_t>(co) * d.cin + ci) * d.k + ky) * d.k + kx] +=
              acc;
        }
      }
    }
  }
  if (gb) {
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
    for (int co = 0; co < d.cout; ++co) {
      double acc = 0.0;
      for (int n = 0; n < d.n; ++n) {
        const double* gyc = gy + (static_cast<std::int64_t>(n) * d.cout + co) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) acc += gyc[i];
      }
      gb[co] += acc;
    }
  }
}

void ref_conv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                            const Conv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int co = 0; co < d.cout; ++co) {
    for (int ci = 0; ci < d.cin; ++ci) {
      for (int ky = 0; ky < d.k; ++ky) {
        for (int kx = 0; kx < d.k; ++kx) {
          double acc = 0.0;
          for (int n = 0; n < d.n; ++n) {
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * d.stride + ky - d.pad;
              if (iy < 0 || iy >= d.h) continue;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * d.stride + kx - d.pad;
                if (ix < 0 || ix >= d.w) continue;
                acc += x[((static_cast<std::int64_t>(n) * d.cin + ci) * d.h + iy) *
                             d.w +
                         ix] *
                       gy[((static_cast<std::int64_t>(n) * d.cout + co) * oh + oy) *
                              ow +
                          ox];
              }
            }
          }
          gw[((static_cast<std::int64_t>(co) * d.cin + ci) * d.k + ky) * d.k + kx] +=
              acc;
        }
      }
    }
  }
  if (gb) {
    for (int co = 0; co < d.cout; ++co) {
      double acc = 0.0;
      for (int n = 0; n < d.n; ++n)
        for (int i = 0; i < oh * ow; ++i)
          acc += gy[(static_cast<std::int64_t>(n) * d.cout + co) * oh * ow + i];
      gb[co] += acc;
    }
  }
}

// ---------------------------------------------------------------------------
// transposed conv, k=5 s=2 p=2 outpad=1 (exact doubling)
//
// y[oy,ox] receives x[iy,ix]*w[ky,kx] whenever oy = 2*iy - 2 + ky. Per output
// element the reduction order is (ci, ky, kx).
// ---------------------------------------------------------------------------

void deconv2d_forward(const double* x, const double* w, const double* b, double* y,
                      const Deconv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const std::int64_t ximg = static_cast<std::int64_t>(d.cin) * d.h * d.w;
  const std::int64_t yplane = static_cast<std::int64_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.cout; ++co) {
      double* yc = y + (static_cast<std::int64_t>(n) * d.cout + co) * yplane;
      const double* xn = x + n * ximg;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b ? b[co] : 0.0;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* xc = xn + static_cast<std::int64_t>(ci) * d.h * d.w;
            const double* wc =
                w + (static_cast<std::int64_t>(ci) * d.cout + co) * d.k * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
              const int ty = oy + d.pad - ky;
              if (ty < 0 || ty % d.stride != 0) continue;
              const int iy = ty / d.stride;
              if (iy >= d.h) continue;
              for (int kx = 0; kx < d.k; ++kx) {
                const int tx = ox + d.pad - kx;
                if (tx < 0 || tx % d.stride != 0) continue;
                const int ix = tx / d.stride;
                if (ix >= d.w) continue;
                acc += xc[static_cast<std::int64_t>(iy) * d.w + ix] * wc[ky * d.k + kx];
              }
            }
          }
          yc[static_cast<std::int64_t>(oy) * ow + ox] = acc;
        }
      }
    }
  }
}

// Scatter-form reference: walk the inputs and spread each through the kernel.
// Same math, different summation order, so comparisons against the gather
// form use a small tolerance.
void ref_deconv2d_forward(const double* x, const double* w, const double* b, double* y,
                          const Deconv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int n = 0; n < d.n; ++n)
    for (int co = 0; co < d.cout; ++co)
      for (int i = 0; i < oh * ow; ++i)
        y[(static_cast<std::int64_t>(n) * d.cout + co) * oh * ow + i] =
            b ? b[co] : 0.0;
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.cin; ++ci) {
      for (int iy = 0; iy < d.h; ++iy) {
        for (int ix = 0; ix < d.w; ++ix) {
          const double xv =
              x[((static_cast<std::int64_t>(n) * d.cin + ci) * d.h + iy) * d.w + ix];
          for (int co = 0; co < d.cout; ++co) {
            for (int ky = 0; ky < d.k; ++ky) {
              const int oy = iy * d.stride - d.pad + ky;
              if (oy < 0 || oy >= oh) continue;
              for (int kx = 0; kx < d.k; ++kx) {
                const int ox = ix * d.stride - d.pad + kx;
                if (ox < 0 || ox >= ow) continue;
                y[((static_cast<std::int64_t>(n) * d.cout + co) * oh + oy) * ow + ox] +=
                    xv *
                    w[((static_cast<std::int64_t>(ci) * d.cout + co) * d.k + ky) * d.k +
                      kx];
              }
            }
          }
        }
      }
    }
  }
}

// gx[n,ci,iy,ix] += sum over (co,ky,kx) of gy[n,co,2iy-2+ky,2ix-2+kx]*w[ci,co,ky,kx]
void deconv2d_grad_input(const double* gy, const double* w, double* gx,
                         const Deconv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  const std::int64_t gyimg = static_cast<std::int64_t>(d.cout) * oh * ow;
  const std::int64_t gxplane = static_cast<std::int64_t>(d.h) * d.w;
#pragma omp parallel for collapse(2) schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.cin; ++ci) {
      double* gxc = gx + (static_cast<std::int64_t>(n) * d.cin + ci) * gxplane;
      const double* gyn = gy + n * gyimg;
      for (int iy = 0; iy < d.h; ++iy) {
        for (int ix = 0; ix < d.w; ++ix) {
          double acc = 0.0;
          for (int co = 0; co < d.cout; ++co) {
            const double* gyc = gyn + static_cast<std::int64_t>(co) * oh * ow;
            const double* wc =
                w + (static_cast<std::int64_t>(ci) * d.cout + co) * d.k * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
              const int oy = iy * d.stride - d.pad + ky;
              if (oy < 0 || oy >= oh) continue;
              for (int kx = 0; kx < d.k; ++kx) {
                const int ox = ix * d.stride - d.pad + kx;
                if (ox < 0 || ox >= ow) continue;
                acc += gyc[static_cast<std::int64_t>(oy) * ow + ox] * wc[ky * d.k + kx];
              }
            }
          }
          gxc[static_cast<std::int64_t>(iy) * d.w + ix] += acc;
        }
      }
    }
  }
}

void ref_deconv2d_grad_input(const double* gy, const double* w, double* gx,
                             const Deconv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.cin; ++ci) {
      for (int co = 0; co < d.cout; ++co) {
        for (int ky = 0; ky < d.k; ++ky) {
          for (int kx = 0; kx < d.k; ++kx) {
            const double wv =
                w[((static_cast<std::int64_t>(ci) * d.cout + co) * d.k + ky) * d.k + kx];
            for (int iy = 0; iy < d.h; ++iy) {
              const int oy = iy * d.stride - d.pad + ky;
              if (oy < 0 || oy >= oh) continue;
              for (int ix = 0; ix < d.w; ++ix) {
                const int ox = ix * d.stride - d.pad + kx;
                if (ox < 0 || ox >= ow) continue;
                gx[((static_cast<std::int64_t>(n) * d.cin + ci) * d.h + iy) * d.w +
                   ix] +=
                    wv *
                    gy[((static_cast<std::int64_t>(n) * d.cout + co) * oh + oy) * ow +
                       ox];
              }
            }
          }
        }
      }
    }
  }
}

void deconv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                          const Deconv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
  for (int ci = 0; ci < d.cin; ++ci) {
    for (int co = 0; co < d.cout; ++co) {
      for (int ky = 0; ky < d.k; ++ky) {
        for (int kx = 0; kx < d.k; ++kx) {
          double acc = 0.0;
          for (int n = 0; n < d.n; ++n) {
            const double* xc =
                x + (static_cast<std::int64_t>(n) * d.cin + ci) * d.h * d.w;
            const double* gyc =
                gy + (static_cast<std::int64_t>(n) * d.cout + co) * oh * ow;
            for (int iy = 0; iy < d.h; ++iy) {
              const int oy = iy * d.stride - d.pad + ky;
              if (oy < 0 || oy >= oh) continue;
              for (int ix = 0; ix < d.w; ++ix) {
                const int ox = ix * d.stride - d.pad + kx;
                if (ox < 0 || ox >= ow) continue;
                acc += xc[static_cast<std::int64_t>(iy) * d.w + ix] *
                       gyc[static_cast<std::int64_t>(oy) * ow + ox];
              }
            }
          }
          gw[((static_cast<std::int64_t>(ci) * d.cout + co) * d.k + ky) * d.k + kx] +=
              acc;
        }
      }
    }
  }
  if (gb) {
#pragma omp parallel for schedule(static) num_threads(g_threads) if (g_threads > 1)
    for (int co = 0; co < d.cout; ++co) {
      double acc = 0.0;
      for (int n = 0; n < d.n; ++n) {
        const double* gyc = gy + (static_cast<std::int64_t>(n) * d.cout + co) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) acc += gyc[i];
      }
      gb[co] += acc;
    }
  }
}

void ref_deconv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                              const Deconv2dDims& d) {
  const int oh = d.out_h(), ow = d.out_w();
  for (int ci = 0; ci < d.cin; ++ci) {
    for (int co = 0; co < d.cout; ++co) {
      for (int ky = 0; ky < d.k; ++ky) {
        for (int kx = 0; kx < d.k; ++kx) {
          double acc = 0.0;
          for (int n = 0; n < d.n; ++n) {
            for (int iy = 0; iy < d.h; ++iy) {
              const int oy = iy * d.stride - d.pad + ky;
              if (oy < 0 || oy >= oh) continue;
              for (int ix = 0; ix < d.w; ++ix) {
                const int ox = ix * d.stride - d.pad + kx;
                if (ox < 0 || ox >= ow) continue;
                acc += x[((static_cast<std::int64_t>(n) * d.cin + ci) * d.h + iy) *
                             d.w +
                         ix] *
                       gy[((static_cast<std::int64_t>(n) * d.cout + co) * oh + oy) *
                              ow +
                          ox];
              }
            }
          }
          gw[((static_cast<std::int64_t>(ci) * d.cout + co) * d.k + ky) * d.k + kx] +=
              acc;
        }
      }
    }
  }
  if (gb) {
    for (int co = 0; co < d.cout; ++co) {
      double acc = 0.0;
      for (int n = 0; n < d.n; ++n)
        for (int i = 0; i < oh * ow; ++i)
          acc += gy[(static_cast<std::int64_t>(n) * d.cout + co) * oh * ow + i];
      gb[co] += acc;
    }
  }
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace {

template <bool TA, bool TB>
inline void matmul_impl(const double* a, const double* b, double* c, int m, int kk,
                        int n, bool accumulate, int nthreads) {
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? c[static_cast<std::int64_t>(i) * n + j] : 0.0;
      for (int k = 0; k < kk; ++k) {
        const double av = TA ? a[static_cast<std::int64_t>(k) * m + i]
                             : a[static_cast<std::int64_t>(i) * kk + k];
        const double bv = TB ? b[static_cast<std::int64_t>(j) * kk + k]
                             : b[static_cast<std::int64_t>(k) * n + j];
        acc += av * bv;
      }
      c[static_cast<std::int64_t>(i) * n + j] = acc;
    }
  }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool ta,
            bool tb, bool accumulate) {
  if (!ta && !tb)
    matmul_impl<false, false>(a, b, c, m, k, n, accumulate, g_threads);
  else if (!ta && tb)
    matmul_impl<false, true>(a, b, c, m, k, n, accumulate, g_threads);
  else if (ta && !tb)
    matmul_impl<true, false>(a, b, c, m, k, n, accumulate, g_threads);
  else
    matmul_impl<true, true>(a, b, c, m, k, n, accumulate, g_threads);
}

void ref_matmul(const double* a, const double* b, double* c, int m, int k, int n,
                bool ta, bool tb, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = accumulate ? c[static_cast<std::int64_t>(i) * n + j] : 0.0;
      for (int kk = 0; kk < k; ++kk) {
        const double av = ta ? a[static_cast<std::int64_t>(kk) * m + i]
                             : a[static_cast<std::int64_t>(i) * k + kk];
        const double bv = tb ? b[static_cast<std::int64_t>(j) * k + kk]
                             : b[static_cast<std::int64_t>(kk) * n + j];
        acc += av * bv;
      }
      c[static_cast<std::int64_t>(i) * n + j] = acc;
    }
  }
}

}  // namespace ostr::kernels
