#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "rmp/autodiff.hpp"

namespace rmp {

using detail::check_finite;

namespace {

using MatRM = Eigen::Matrix<scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

// Patch matrix: one row per output pixel, columns (ky*K+kx)*Cin + ci,
// zero padded at the borders. Reused scratch to avoid churn in the
// training loop; contents are fully rewritten on every call.
void im2col(const Tensor& x, int k, std::vector<scalar>& col) {
  const int h = x.shape()[0], w = x.shape()[1], cin = x.shape()[2];
  const int pad = (k - 1) / 2;
  const int cols = k * k * cin;
  col.assign(static_cast<std::size_t>(h) * w * cols, scalar(0));
  const scalar* src = x.data();
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      scalar* row = col.data() + (static_cast<std::size_t>(y) * w + xx) * cols;
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = xx + kx - pad;
          if (sx < 0 || sx >= w) continue;
          const scalar* in = src + (static_cast<std::size_t>(sy) * w + sx) * cin;
          scalar* dst = row + (ky * k + kx) * cin;
          for (int ci = 0; ci < cin; ++ci) dst[ci] = in[ci];
        }
      }
    }
  }
}

// Scatter-add of the patch-matrix gradient back onto the input grid.
void col2im_add(const std::vector<scalar>& dcol, int h, int w, int cin, int k, Tensor& dx) {
  const int pad = (k - 1) / 2;
  const int cols = k * k * cin;
  scalar* dst = dx.data();
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const scalar* row = dcol.data() + (static_cast<std::size_t>(y) * w + xx) * cols;
      for (int ky = 0; ky < k; ++ky) {
        const int sy = y + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int sx = xx + kx - pad;
          if (sx < 0 || sx >= w) continue;
          scalar* out = dst + (static_cast<std::size_t>(sy) * w + sx) * cin;
          const scalar* g = row + (ky * k + kx) * cin;
          for (int ci = 0; ci < cin; ++ci) out[ci] += g[ci];
        }
      }
    }
  }
}

thread_local std::vector<scalar> g_col_scratch;
thread_local std::vector<scalar> g_dcol_scratch;

}  // namespace

Value conv2d(Value x, Value k, Value b) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& kv = t.value(k);
  const Tensor& bv = t.value(b);
  RMP_CHECK(xv.shape().ndim() == 3, "conv2d: input must be HxWxC, got " + xv.shape().str());
  RMP_CHECK(kv.shape().ndim() == 4, "conv2d: kernel must be KxKxCinxCout, got " + kv.shape().str());
  const int h = xv.shape()[0], w = xv.shape()[1], cin = xv.shape()[2];
  const int kk = kv.shape()[0], cout = kv.shape()[3];
  RMP_CHECK(kv.shape()[1] == kk, "conv2d: kernel must be square");
  RMP_CHECK(kk % 2 == 1, "conv2d: kernel size must be odd");
  RMP_CHECK(kv.shape()[2] == cin, "conv2d: kernel Cin " + std::to_string(kv.shape()[2]) +
                                      " does not match input channels " + std::to_string(cin));
  RMP_CHECK(bv.shape().ndim() == 1 && bv.shape()[0] == cout,
            "conv2d: bias must have Cout entries");

  const int npix = h * w;
  const int kcols = kk * kk * cin;
  Tensor out(Shape{h, w, cout});
  {
    CMapM kmat(kv.data(), kcols, cout);
    MapM omat(out.data(), npix, cout);
    if (kk == 1) {
      CMapM xmat(xv.data(), npix, cin);
      omat.noalias() = xmat * kmat;
    } else {
      im2col(xv, kk, g_col_scratch);
      CMapM cmat(g_col_scratch.data(), npix, kcols);
      omat.noalias() = cmat * kmat;
    }
    for (int p = 0; p < npix; ++p)
      for (int c = 0; c < cout; ++c) out[static_cast<std::int64_t>(p) * cout + c] += bv[c];
  }
  check_finite(out, "conv2d");

  const bool ngx = t.needs_grad(x.id), ngk = t.needs_grad(k.id), ngb = t.needs_grad(b.id);
  const int xid = x.id, kid = k.id, bid = b.id;
  const int id = t.push_node(std::move(out), ngx || ngk || ngb);
  if (ngx || ngk || ngb) {
    t.set_backward(id, [xid, kid, bid, id, h, w, cin, kk, cout, ngx, ngk, ngb](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      const Tensor& xval = tp.node_val(xid);
      const Tensor& kval = tp.node_val(kid);
      const int npix2 = h * w;
      const int kcols2 = kk * kk * cin;
      CMapM gmat(g.data(), npix2, cout);
      if (ngb) {
        Tensor& gb = tp.grad_buf(bid);
        for (int p = 0; p < npix2; ++p)
          for (int c = 0; c < cout; ++c) gb[c] += g[static_cast<std::int64_t>(p) * cout + c];
      }
      if (kk == 1) {
        CMapM xmat(xval.data(), npix2, cin);
        if (ngk) {
          Tensor& gk = tp.grad_buf(kid);
          MapM gkmat(gk.data(), kcols2, cout);
          gkmat.noalias() += xmat.transpose() * gmat;
        }
        if (ngx) {
          Tensor& gx = tp.grad_buf(xid);
          MapM gxmat(gx.data(), npix2, cin);
          CMapM kmat(kval.data(), kcols2, cout);
          gxmat.noalias() += gmat * kmat.transpose();
        }
      } else {
        im2col(xval, kk, g_col_scratch);
        CMapM cmat(g_col_scratch.data(), npix2, kcols2);
        if (ngk) {
          Tensor& gk = tp.grad_buf(kid);
          MapM gkmat(gk.data(), kcols2, cout);
          gkmat.noalias() += cmat.transpose() * gmat;
        }
        if (ngx) {
          g_dcol_scratch.assign(static_cast<std::size_t>(npix2) * kcols2, scalar(0));
          MapM dcmat(g_dcol_scratch.data(), npix2, kcols2);
          CMapM kmat(kval.data(), kcols2, cout);
          dcmat.noalias() = gmat * kmat.transpose();
          Tensor& gx = tp.grad_buf(xid);
          col2im_add(g_dcol_scratch, h, w, cin, kk, gx);
        }
      }
    });
  }
  return Value{&t, id};
}

Value pool2d(Value x, PoolMode mode) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  RMP_CHECK(xv.shape().ndim() == 3, "pool2d: input must be HxWxC");
  const int h = xv.shape()[0], w = xv.shape()[1], c = xv.shape()[2];
  if (h % 2 != 0 || w % 2 != 0)
    throw ContractError("pool2d: extents must be even (got " + xv.shape().str() +
                        "); pad the input first");
  const int oh = h / 2, ow = w / 2;
  Tensor out(Shape{oh, ow, c});
  // argmax index within the 2x2 window (row-major; first max wins on ties)
  std::vector<std::uint8_t> argmax;
  if (mode == PoolMode::kMax) argmax.resize(static_cast<std::size_t>(oh) * ow * c);
  for (int y = 0; y < oh; ++y) {
    for (int xx = 0; xx < ow; ++xx) {
      for (int ci = 0; ci < c; ++ci) {
        const scalar v00 = xv.at(2 * y, 2 * xx, ci);
        const scalar v01 = xv.at(2 * y, 2 * xx + 1, ci);
        const scalar v10 = xv.at(2 * y + 1, 2 * xx, ci);
        const scalar v11 = xv.at(2 * y + 1, 2 * xx + 1, ci);
        if (mode == PoolMode::kAvg) {
          out.at(y, xx, ci) = (v00 + v01 + v10 + v11) * scalar(0.25);
        } else {
          int best = 0;
          scalar bv = v00;
          if (v01 > bv) { bv = v01; best = 1; }
          if (v10 > bv) { bv = v10; best = 2; }
          if (v11 > bv) { bv = v11; best = 3; }
          out.at(y, xx, ci) = bv;
          argmax[(static_cast<std::size_t>(y) * ow + xx) * c + ci] = static_cast<std::uint8_t>(best);
        }
      }
    }
  }
  check_finite(out, "pool2d");
  const bool ng = t.needs_grad(x.id);
  const int xid = x.id;
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [xid, id, oh, ow, c, mode, argmax](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      Tensor& gx = tp.grad_buf(xid);
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          for (int ci = 0; ci < c; ++ci) {
            const scalar gv = g.at(y, xx, ci);
            if (mode == PoolMode::kAvg) {
              const scalar q = gv * scalar(0.25);
              gx.at(2 * y, 2 * xx, ci) += q;
              gx.at(2 * y, 2 * xx + 1, ci) += q;
              gx.at(2 * y + 1, 2 * xx, ci) += q;
              gx.at(2 * y + 1, 2 * xx + 1, ci) += q;
            } else {
              const int best = argmax[(static_cast<std::size_t>(y) * ow + xx) * c + ci];
              gx.at(2 * y + best / 2, 2 * xx + best % 2, ci) += gv;
            }
          }
        }
      }
    });
  }
  return Value{&t, id};
}

namespace {

// Sample positions for factor-2 upsampling, align-corners-false:
// out(i) reads input at (i + 0.5)/2 - 0.5, clamped to the valid range.
struct LerpCoef {
  int lo, hi;
  scalar wlo, whi;
};

std::vector<LerpCoef> bilinear_axis(int out_n, int in_n) {
  std::vector<LerpCoef> cs(out_n);
  for (int i = 0; i < out_n; ++i) {
    double s = (i + 0.5) / 2.0 - 0.5;
    s = std::min(std::max(s, 0.0), static_cast<double>(in_n - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, in_n - 1);
    const double f = s - lo;
    cs[i] = {lo, hi, static_cast<scalar>(1.0 - f), static_cast<scalar>(f)};
  }
  return cs;
}

}  // namespace

Value upsample2d(Value x, UpsampleMode mode) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  RMP_CHECK(xv.shape().ndim() == 3, "upsample2d: input must be HxWxC");
  const int h = xv.shape()[0], w = xv.shape()[1], c = xv.shape()[2];
  const int oh = 2 * h, ow = 2 * w;
  Tensor out(Shape{oh, ow, c});
  std::vector<LerpCoef> ys, xs;
  if (mode == UpsampleMode::kNearest) {
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        for (int ci = 0; ci < c; ++ci) out.at(y, xx, ci) = xv.at(y / 2, xx / 2, ci);
  } else {
    ys = bilinear_axis(oh, h);
    xs = bilinear_axis(ow, w);
    for (int y = 0; y < oh; ++y) {
      const LerpCoef& ry = ys[y];
      for (int xx = 0; xx < ow; ++xx) {
        const LerpCoef& rx = xs[xx];
        for (int ci = 0; ci < c; ++ci) {
          out.at(y, xx, ci) = ry.wlo * (rx.wlo * xv.at(ry.lo, rx.lo, ci) + rx.whi * xv.at(ry.lo, rx.hi, ci)) +
                              ry.whi * (rx.wlo * xv.at(ry.hi, rx.lo, ci) + rx.whi * xv.at(ry.hi, rx.hi, ci));
        }
      }
    }
  }
  check_finite(out, "upsample2d");
  const bool ng = t.needs_grad(x.id);
  const int xid = x.id;
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [xid, id, oh, ow, c, mode, ys, xs](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      Tensor& gx = tp.grad_buf(xid);
      if (mode == UpsampleMode::kNearest) {
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx)
            for (int ci = 0; ci < c; ++ci) gx.at(y / 2, xx / 2, ci) += g.at(y, xx, ci);
      } else {
        for (int y = 0; y < oh; ++y) {
          const LerpCoef& ry = ys[y];
          for (int xx = 0; xx < ow; ++xx) {
            const LerpCoef& rx = xs[xx];
            for (int ci = 0; ci < c; ++ci) {
              const scalar gv = g.at(y, xx, ci);
              gx.at(ry.lo, rx.lo, ci) += gv * ry.wlo * rx.wlo;
              gx.at(ry.lo, rx.hi, ci) += gv * ry.wlo * rx.whi;
              gx.at(ry.hi, rx.lo, ci) += gv * ry.whi * rx.wlo;
              gx.at(ry.hi, rx.hi, ci) += gv * ry.whi * rx.whi;
            }
          }
        }
      }
    });
  }
  return Value{&t, id};
}

}  // namespace rmp
