#pragma once

namespace ostr::kernels {

// Worker count for the OpenMP paths. 1 (the default) runs the parallel
// kernels on a single thread; any count produces bit-identical results
// because every output element is reduced in a fixed serial order by
// exactly one thread.
void set_threads(int n);
int threads();

struct Conv2dDims {
  int n, cin, h, w;   // input  [n, cin, h, w]
  int cout, k;        // weight [cout, cin, k, k]
  int stride, pad;
  int out_h() const { return (h + 2 * pad - k) / stride + 1; }
  int out_w() const { return (w + 2 * pad - k) / stride + 1; }
};

// y = conv(x, w) + b;  b may be null. Overwrites y.
void conv2d_forward(const double* x, const double* w, const double* b, double* y,
                    const Conv2dDims& d);
// gx += conv-transpose(gy, w). Accumulates.
void conv2d_grad_input(const double* gy, const double* w, double* gx,
                       const Conv2dDims& d);
// gw += x (*) gy;  gb += sum(gy).  gb may be null. Accumulates.
void conv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                        const Conv2dDims& d);

// Serial reference implementations, same accumulation order per element.
void ref_conv2d_forward(const double* x, const double* w, const double* b, double* y,
                        const Conv2dDims& d);
void ref_conv2d_grad_input(const double* gy, const double* w, double* gx,
                           const Conv2dDims& d);
void ref_conv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                            const Conv2dDims& d);

// Transposed convolution fixed at kernel 5, stride 2, padding 2, output
// padding 1, which exactly doubles the spatial size. Weight layout is
// [cin, cout, 5, 5]; output is [n, cout, 2h, 2w].
struct Deconv2dDims {
  int n, cin, h, w, cout;
  static constexpr int k = 5, stride = 2, pad = 2;
  int out_h() const { return 2 * h; }
  int out_w() const { return 2 * w; }
};

void deconv2d_forward(const double* x, const double* w, const double* b, double* y,
                      const Deconv2dDims& d);
void deconv2d_grad_input(const double* gy, const double* w, double* gx,
                         const Deconv2dDims& d);
void deconv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                          const Deconv2dDims& d);

// Serial references. The forward one is scatter-form (different summation
// order, compare with tolerance); the gradient ones match order bit-exactly.
void ref_deconv2d_forward(const double* x, const double* w, const double* b, double* y,
                          const Deconv2dDims& d);
void ref_deconv2d_grad_input(const double* gy, const double* w, double* gx,
                             const Deconv2dDims& d);
void ref_deconv2d_grad_weight(const double* x, const double* gy, double* gw, double* gb,
                              const Deconv2dDims& d);

// c = op(a) * op(b) with op controlled by the transpose flags; shapes after
// op are a:[m,k], b:[k,n]. accumulate=true adds into c instead of
// overwriting.
void matmul(const double* a, const double* b, double* c, int m, int k, int n,
            bool ta, bool tb, bool accumulate);
void ref_matmul(const double* a, const double* b, double* c, int m, int k, int n,
                bool ta, bool tb, bool accumulate);

}  // namespace ostr::kernels
