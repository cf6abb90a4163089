#include "rcm/ops.hpp"

#include "gemm.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>

namespace rcm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

using detail::GradNode;
using detail::make_result;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw InvalidArgument(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                          shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](GradNode& n, std::span<const double> g) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto d = n.grad_of(k);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](GradNode& n, std::span<const double> g) {
    auto da = n.grad_of(0);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i];
    auto db = n.grad_of(1);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](GradNode& n, std::span<const double> g) {
    auto xa = n.inputs[0].data(), xb = n.inputs[1].data();
    auto da = n.grad_of(0);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * xb[i];
    auto db = n.grad_of(1);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * xa[i];
  });
}

Tensor scale(const Tensor& x, double factor) {
  auto v = x.data();
  Buffer out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * factor;
  return make_result(x.shape(), std::move(out), {x}, [factor](GradNode& n, std::span<const double> g) {
    auto d = n.grad_of(0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& x, double value) {
  auto v = x.data();
  Buffer out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] + value;
  return make_result(x.shape(), std::move(out), {x}, [](GradNode& n, std::span<const double> g) {
    auto d = n.grad_of(0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({}, {s}, {x}, [](GradNode& n, std::span<const double> g) {
    auto d = n.grad_of(0);
    for (auto& e : d) e += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw InvalidArgument("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({}, {s * inv}, {x}, [inv](GradNode& n, std::span<const double> g) {
    auto d = n.grad_of(0);
    for (auto& e : d) e += g[0] * inv;
  });
}

Tensor silu(const Tensor& x) {
  const auto n = static_cast<Eigen::Index>(x.numel());
  auto sig = std::make_shared<Buffer>(x.numel());
  const Eigen::Map<const Eigen::ArrayXd> xa(x.data().data(), n);
  Eigen::Map<Eigen::ArrayXd> sa(sig->data(), n);
  sa = ((-xa).exp() + 1.0).inverse();
  Buffer out(x.numel());
  Eigen::Map<Eigen::ArrayXd>(out.data(), n) = xa * sa;
  return make_result(x.shape(), std::move(out), {x}, [sig, n](GradNode& node, std::span<const double> g) {
    auto d = node.grad_of(0);
    const Eigen::Map<const Eigen::ArrayXd> xa(node.inputs[0].data().data(), n), s(sig->data(), n), ga(g.data(), n);
    Eigen::Map<Eigen::ArrayXd>(d.data(), n) += ga * s * (1.0 + xa * (1.0 - s));
  });
}

Tensor scale_batch(const Tensor& x, std::span<const double> factors) {
  if (x.rank() == 0 || x.dim(0) != factors.size()) {
    throw InvalidArgument("scale_batch: " + std::to_string(factors.size()) + " factors for tensor " +
                          shape_str(x.shape()));
  }
  const std::size_t per = x.numel() / factors.size();
  Buffer f(factors.begin(), factors.end());
  auto v = x.data();
  Buffer out(v.size());
  for (std::size_t b = 0; b < f.size(); ++b)
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) out[i] = v[i] * f[b];
  return make_result(x.shape(), std::move(out), {x}, [f, per](GradNode& n, std::span<const double> g) {
    auto d = n.grad_of(0);
    if (d.empty()) return;
    for (std::size_t b = 0; b < f.size(); ++b)
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) d[i] += g[i] * f[b];
  });
}

Tensor weighted_mse(const Tensor& pred, const Tensor& target, std::span<const double> weights) {
  require_same_shape("weighted_mse", pred, target);
  if (pred.rank() == 0 || pred.dim(0) != weights.size() || weights.empty()) {
    throw InvalidArgument("weighted_mse: " + std::to_string(weights.size()) + " weights for tensor " +
                          shape_str(pred.shape()));
  }
  const std::size_t batch = weights.size();
  const std::size_t per = pred.numel() / batch;
  Buffer w(weights.begin(), weights.end());
  auto p = pred.data(), t = target.data();
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double s = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      const double e = p[i] - t[i];
      s += e * e;
    }
    total += w[b] * s / static_cast<double>(per);
  }
  total /= static_cast<double>(batch);
  return make_result({}, {total}, {pred, target}, [w, per](GradNode& n, std::span<const double> g) {
    auto p = n.inputs[0].data(), t = n.inputs[1].data();
    const double norm = 2.0 * g[0] / static_cast<double>(per * w.size());
    auto dp = n.grad_of(0);
    auto dt = n.grad_of(1);
    for (std::size_t b = 0; b < w.size(); ++b) {
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
        const double e = norm * w[b] * (p[i] - t[i]);
        if (!dp.empty()) dp[i] += e;
        if (!dt.empty()) dt[i] -= e;
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, k, ho, wo;
  int stride, pad;
  std::size_t rows() const { return cin * k * k; }
  std::size_t plane() const { return ho * wo; }
};

// Valid output columns [lo, hi) for kernel offset `kx` along one axis.
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, int stride, int pad, std::size_t kx) {
  std::size_t lo = 0, hi = 0;
  while (lo < out && static_cast<long>(lo) * stride - pad + static_cast<long>(kx) < 0) ++lo;
  hi = lo;
  while (hi < out && static_cast<long>(hi) * stride - pad + static_cast<long>(kx) < static_cast<long>(in)) ++hi;
  return {lo, hi};
}

// col[(ci*k+ky)*k+kx, oy*wo+ox] = x[ci, oy*s-p+ky, ox*s-p+kx] for one sample.
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t plane = g.plane();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* src = x + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const auto [ylo, yhi] = valid_range(g.ho, g.h, g.stride, g.pad, ky);
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const auto [xlo, xhi] = valid_range(g.wo, g.w, g.stride, g.pad, kx);
        double* row = col + ((ci * g.k + ky) * g.k + kx) * plane;
        std::fill(row, row + ylo * g.wo, 0.0);
        std::fill(row + yhi * g.wo, row + plane, 0.0);
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          double* dst = row + oy * g.wo;
          const double* srow = src + (static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky)) * g.w;
          std::fill(dst, dst + xlo, 0.0);
          std::fill(dst + xhi, dst + g.wo, 0.0);
          if (g.stride == 1) {
            std::copy(srow + (xlo + kx - g.pad), srow + (xhi + kx - g.pad), dst + xlo);
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) dst[ox] = srow[ox * g.stride - g.pad + kx];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* dx) {
  const std::size_t plane = g.plane();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    double* dst = dx + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      const auto [ylo, yhi] = valid_range(g.ho, g.h, g.stride, g.pad, ky);
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const auto [xlo, xhi] = valid_range(g.wo, g.w, g.stride, g.pad, kx);
        const double* row = col + ((ci * g.k + ky) * g.k + kx) * plane;
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          const double* src = row + oy * g.wo;
          double* drow = dst + (static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky)) * g.w;
          for (std::size_t ox = xlo; ox < xhi; ++ox) drow[ox * g.stride - g.pad + kx] += src[ox];
        }
      }
    }
  }
}

// Zero-padded copy of one sample. With stride 1, tap (ci, ky, kx) is the contiguous window starting at
// ci*hp*wp + ky*wp + kx and output (oy, ox) is its column oy*wp + ox, so no im2col is needed.
struct PaddedTaps {
  std::size_t wp = 0, span = 0;
  Buffer xp;
  std::vector<const double*> taps;

  void build(const ConvGeometry& g, const double* x) {
    const std::size_t hp = g.h + 2 * static_cast<std::size_t>(g.pad);
    wp = g.w + 2 * static_cast<std::size_t>(g.pad);
    span = (g.ho - 1) * wp + g.wo;
    xp.assign(g.cin * hp * wp, 0.0);
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t y = 0; y < g.h; ++y) {
        const double* src = x + (ci * g.h + y) * g.w;
        std::copy(src, src + g.w, xp.data() + (ci * hp + y + g.pad) * wp + g.pad);
      }
    taps.resize(g.rows());
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t ky = 0; ky < g.k; ++ky)
        for (std::size_t kx = 0; kx < g.k; ++kx)
          taps[(ci * g.k + ky) * g.k + kx] = xp.data() + ci * hp * wp + ky * wp + kx;
  }
};

std::vector<const double*> row_pointers(const double* base, std::size_t rows, std::size_t stride) {
  std::vector<const double*> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = base + i * stride;
  return out;
}

// Per-sample scratch reused across calls; sized for one sample's columns.
Buffer& scratch(int slot, std::size_t n) {
  thread_local Buffer buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding) {
  require_rank("conv2d", input, 4, "input");
  require_rank("conv2d", kernel, 4, "kernel");
  require_rank("conv2d", bias, 1, "bias");
  if (kernel.dim(1) != input.dim(1)) {
    throw InvalidArgument("conv2d: input has " + std::to_string(input.dim(1)) + " channels but kernel " +
                          shape_str(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
  }
  if (kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0) {
    throw InvalidArgument("conv2d: kernel must be square with odd size, got " + shape_str(kernel.shape()));
  }
  if (bias.dim(0) != kernel.dim(0)) {
    throw InvalidArgument("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                          std::to_string(kernel.dim(0)) + " output channels");
  }
  if (stride < 1 || padding < 0) throw InvalidArgument("conv2d: stride must be >= 1 and padding >= 0");

  ConvGeometry g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.k = kernel.dim(2);
  g.stride = stride;
  g.pad = padding;
  if (g.h + 2 * padding < g.k || g.w + 2 * padding < g.k) {
    throw InvalidArgument("conv2d: kernel larger than padded input " + shape_str(input.shape()));
  }
  g.ho = (g.h + 2 * padding - g.k) / stride + 1;
  g.wo = (g.w + 2 * padding - g.k) / stride + 1;

  const std::size_t plane = g.plane();
  Buffer out(g.batch * g.cout * plane);
  auto bv = bias.data();
  const auto krows = row_pointers(kernel.data().data(), g.cout, g.rows());
  PaddedTaps pt;
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* xb = input.data().data() + b * g.cin * g.h * g.w;
    double* ob = out.data() + b * g.cout * plane;
    if (g.stride == 1) {
      pt.build(g, xb);
      auto& wide = scratch(0, g.cout * pt.span);
      detail::gemm_rows(g.cout, g.rows(), pt.span, krows.data(), pt.taps.data(), wide.data(), pt.span, false);
      for (std::size_t co = 0; co < g.cout; ++co)
        for (std::size_t oy = 0; oy < g.ho; ++oy)
          for (std::size_t ox = 0; ox < g.wo; ++ox)
            ob[(co * g.ho + oy) * g.wo + ox] = wide[co * pt.span + oy * pt.wp + ox] + bv[co];
    } else {
      auto& col = scratch(0, g.rows() * plane);
      im2col(g, xb, col.data());
      detail::gemm_rowmajor(g.cout, g.rows(), plane, kernel.data().data(), g.rows(), col.data(), plane, ob, plane,
                            false);
      for (std::size_t co = 0; co < g.cout; ++co)
        for (std::size_t i = 0; i < plane; ++i) ob[co * plane + i] += bv[co];
    }
  }

  return make_result(
      {g.batch, g.cout, g.ho, g.wo}, std::move(out), {input, kernel, bias},
      [g](GradNode& n, std::span<const double> gout) {
        const std::size_t plane = g.plane();
        auto dx = n.grad_of(0), dk = n.grad_of(1), db = n.grad_of(2);
        auto w = n.inputs[1].data();
        // Stride 1: dx is a stride-1 convolution of gout with the flipped, transposed kernel.
        const ConvGeometry gt{g.batch, g.cout, g.ho, g.wo, g.cin, g.k, g.h, g.w, 1, static_cast<int>(g.k) - 1 - g.pad};
        Buffer wt;
        if (!dx.empty() && g.stride == 1) {
          wt.resize(g.cin * g.cout * g.k * g.k);
          const std::size_t kk = g.k * g.k;
          for (std::size_t co = 0; co < g.cout; ++co)
            for (std::size_t ci = 0; ci < g.cin; ++ci)
              for (std::size_t t = 0; t < kk; ++t)
                wt[ci * g.cout * kk + co * kk + (kk - 1 - t)] = w[(co * g.cin + ci) * kk + t];
        } else if (!dx.empty()) {
          // Scatter path: wt[r][co] = w[co][r].
          wt.resize(g.rows() * g.cout);
          for (std::size_t co = 0; co < g.cout; ++co)
            for (std::size_t r = 0; r < g.rows(); ++r) wt[r * g.cout + co] = w[co * g.rows() + r];
        }
        // dk accumulates transposed as taps * gout^T and is added back once.
        Buffer dkt, gbt;
        if (!dk.empty()) dkt.assign(g.rows() * g.cout, 0.0);
        PaddedTaps pt;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double* gob = gout.data() + b * g.cout * plane;
          const double* xb = n.inputs[0].data().data() + b * g.cin * g.h * g.w;
          const ConstMapMat gb(gob, g.cout, plane);
          if (!dk.empty() && g.stride == 1) {
            pt.build(g, xb);
            gbt.assign(pt.span * g.cout, 0.0);
            for (std::size_t oy = 0; oy < g.ho; ++oy)
              for (std::size_t ox = 0; ox < g.wo; ++ox)
                for (std::size_t co = 0; co < g.cout; ++co)
                  gbt[(oy * pt.wp + ox) * g.cout + co] = gob[co * plane + oy * g.wo + ox];
            const auto grows = row_pointers(gbt.data(), pt.span, g.cout);
            detail::gemm_rows(g.rows(), pt.span, g.cout, pt.taps.data(), grows.data(), dkt.data(), g.cout, true);
          } else if (!dk.empty()) {
            auto& col = scratch(0, g.rows() * plane);
            im2col(g, xb, col.data());
            gbt.resize(plane * g.cout);
            MapMat(gbt.data(), plane, g.cout) = gb.transpose();
            detail::gemm_rowmajor(g.rows(), plane, g.cout, col.data(), plane, gbt.data(), g.cout, dkt.data(), g.cout,
                                  true);
          }
          if (!db.empty())
            for (std::size_t co = 0; co < g.cout; ++co) db[co] += gb.row(co).sum();
          if (!dx.empty() && g.stride == 1) {
            pt.build(gt, gob);
            auto& wide = scratch(1, g.cin * pt.span);
            const auto wrows = row_pointers(wt.data(), g.cin, gt.rows());
            detail::gemm_rows(g.cin, gt.rows(), pt.span, wrows.data(), pt.taps.data(), wide.data(), pt.span, false);
            double* dxb = dx.data() + b * g.cin * g.h * g.w;
            for (std::size_t ci = 0; ci < g.cin; ++ci)
              for (std::size_t y = 0; y < g.h; ++y)
                for (std::size_t x = 0; x < g.w; ++x)
                  dxb[(ci * g.h + y) * g.w + x] += wide[ci * pt.span + y * pt.wp + x];
          } else if (!dx.empty()) {
            auto& dcol = scratch(1, g.rows() * plane);
            detail::gemm_rowmajor(g.rows(), g.cout, plane, wt.data(), g.cout, gob, plane, dcol.data(), plane, false);
            col2im_add(g, dcol.data(), dx.data() + b * g.cin * g.h * g.w);
          }
        }
        if (!dk.empty()) MapMat(dk.data(), g.cout, g.rows()) += ConstMapMat(dkt.data(), g.rows(), g.cout).transpose();
      });
}

Tensor group_norm(const Tensor& input, int groups, double eps) {
  require_rank("group_norm", input, 4, "input");
  if (groups < 1 || input.dim(1) % static_cast<std::size_t>(groups) != 0) {
    throw InvalidArgument("group_norm: " + std::to_string(input.dim(1)) + " channels not divisible by " +
                          std::to_string(groups) + " groups");
  }
  if (!(eps > 0.0)) throw InvalidArgument("group_norm: eps must be positive");
  const std::size_t batch = input.dim(0);
  const std::size_t ng = static_cast<std::size_t>(groups);
  const std::size_t seg = input.numel() / (batch * ng);  // contiguous elements per group
  auto x = input.data();
  Buffer out(x.size());
  auto inv_std = std::make_shared<Buffer>(batch * ng);
  for (std::size_t s = 0; s < batch * ng; ++s) {
    const auto len = static_cast<Eigen::Index>(seg);
    const Eigen::Map<const Eigen::ArrayXd> p(x.data() + s * seg, len);
    const double m = p.mean();
    const double v = (p - m).square().mean();
    const double inv = 1.0 / std::sqrt(v + eps);
    (*inv_std)[s] = inv;
    Eigen::Map<Eigen::ArrayXd>(out.data() + s * seg, len) = (p - m) * inv;
  }
  auto normalized = std::make_shared<Buffer>(out);
  return make_result(input.shape(), std::move(out), {input},
                     [seg, inv_std, normalized](GradNode& n, std::span<const double> g) {
                       auto d = n.grad_of(0);
                       const double inv_n = 1.0 / static_cast<double>(seg);
                       for (std::size_t s = 0; s < inv_std->size(); ++s) {
                         const auto len = static_cast<Eigen::Index>(seg);
                         const Eigen::Map<const Eigen::ArrayXd> gy(g.data() + s * seg, len);
                         const Eigen::Map<const Eigen::ArrayXd> xh(normalized->data() + s * seg, len);
                         const double mg = gy.sum() * inv_n;
                         const double mgx = (gy * xh).sum() * inv_n;
                         const double inv = (*inv_std)[s];
                         Eigen::Map<Eigen::ArrayXd>(d.data() + s * seg, len) += inv * (gy - mg - xh * mgx);
                       }
                     });
}

Tensor channel_affine(const Tensor& x, const Tensor& scale_t, const Tensor& shift) {
  require_rank("channel_affine", x, 4, "input");
  const Shape expect{x.dim(0), x.dim(1)};
  if (scale_t.shape() != expect || shift.shape() != expect) {
    throw InvalidArgument("channel_affine: scale " + shape_str(scale_t.shape()) + " and shift " +
                          shape_str(shift.shape()) + " must both be " + shape_str(expect));
  }
  const std::size_t bc = expect[0] * expect[1];
  const std::size_t plane = x.dim(2) * x.dim(3);
  auto xv = x.data(), sv = scale_t.data(), tv = shift.data();
  Buffer out(xv.size());
  for (std::size_t j = 0; j < bc; ++j)
    for (std::size_t i = 0; i < plane; ++i) out[j * plane + i] = xv[j * plane + i] * sv[j] + tv[j];
  return make_result(x.shape(), std::move(out), {x, scale_t, shift},
                     [bc, plane](GradNode& n, std::span<const double> g) {
                       auto xv = n.inputs[0].data(), sv = n.inputs[1].data();
                       auto dx = n.grad_of(0), ds = n.grad_of(1), dt = n.grad_of(2);
                       for (std::size_t j = 0; j < bc; ++j) {
                         const auto len = static_cast<Eigen::Index>(plane);
                         const Eigen::Map<const Eigen::ArrayXd> gp(g.data() + j * plane, len);
                         if (!dx.empty()) Eigen::Map<Eigen::ArrayXd>(dx.data() + j * plane, len) += gp * sv[j];
                         if (!ds.empty())
                           ds[j] += (gp * Eigen::Map<const Eigen::ArrayXd>(xv.data() + j * plane, len)).sum();
                         if (!dt.empty()) dt[j] += gp.sum();
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2, "input");
  require_rank("linear", weight, 2, "weight");
  require_rank("linear", bias, 1, "bias");
  if (weight.dim(1) != x.dim(1) || bias.dim(0) != weight.dim(0)) {
    throw InvalidArgument("linear: input " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                          ", bias " + shape_str(bias.shape()) + " are incompatible");
  }
  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  const auto din = static_cast<Eigen::Index>(x.dim(1));
  const auto dout = static_cast<Eigen::Index>(weight.dim(0));
  Buffer out(static_cast<std::size_t>(batch * dout));
  MapMat y(out.data(), batch, dout);
  y.noalias() = ConstMapMat(x.data().data(), batch, din) * ConstMapMat(weight.data().data(), dout, din).transpose();
  auto bv = bias.data();
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index o = 0; o < dout; ++o) y(b, o) += bv[static_cast<std::size_t>(o)];
  return make_result({x.dim(0), weight.dim(0)}, std::move(out), {x, weight, bias},
                     [batch, din, dout](GradNode& n, std::span<const double> g) {
                       ConstMapMat G(g.data(), batch, dout);
                       if (auto dx = n.grad_of(0); !dx.empty())
                         MapMat(dx.data(), batch, din).noalias() += G * ConstMapMat(n.inputs[1].data().data(), dout, din);
                       if (auto dw = n.grad_of(1); !dw.empty())
                         MapMat(dw.data(), dout, din).noalias() +=
                             G.transpose() * ConstMapMat(n.inputs[0].data().data(), batch, din);
                       if (auto db = n.grad_of(2); !db.empty())
                         for (Eigen::Index o = 0; o < dout; ++o) db[static_cast<std::size_t>(o)] += G.col(o).sum();
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank("concat_channels", a, 4, "first input");
  require_rank("concat_channels", b, 4, "second input");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw InvalidArgument("concat_channels: " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                          " differ outside the channel axis");
  }
  const std::size_t batch = a.dim(0), plane = a.dim(2) * a.dim(3);
  const std::size_t sa = a.dim(1) * plane, sb = b.dim(1) * plane;
  Buffer out(a.numel() + b.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(av.data() + i * sa, sa, out.data() + i * (sa + sb));
    std::copy_n(bv.data() + i * sb, sb, out.data() + i * (sa + sb) + sa);
  }
  return make_result({batch, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)}, std::move(out), {a, b},
                     [batch, sa, sb](GradNode& n, std::span<const double> g) {
                       auto da = n.grad_of(0), db = n.grad_of(1);
                       for (std::size_t i = 0; i < batch; ++i) {
                         const double* src = g.data() + i * (sa + sb);
                         if (!da.empty())
                           for (std::size_t j = 0; j < sa; ++j) da[i * sa + j] += src[j];
                         if (!db.empty())
                           for (std::size_t j = 0; j < sb; ++j) db[i * sb + j] += src[sa + j];
                       }
                     });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_rank("upsample_nearest2x", x, 4, "input");
  const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  auto v = x.data();
  Buffer out(bc * 4 * h * w);
  for (std::size_t j = 0; j < bc; ++j)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx) out[(j * 2 * h + y) * 2 * w + xx] = v[(j * h + y / 2) * w + xx / 2];
  return make_result({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {x},
                     [bc, h, w](GradNode& n, std::span<const double> g) {
                       auto d = n.grad_of(0);
                       for (std::size_t j = 0; j < bc; ++j)
                         for (std::size_t y = 0; y < 2 * h; ++y)
                           for (std::size_t xx = 0; xx < 2 * w; ++xx)
                             d[(j * h + y / 2) * w + xx / 2] += g[(j * 2 * h + y) * 2 * w + xx];
                     });
}

}  // namespace rcm
