#include "resshift/nn/ops.hpp"

// Small products would otherwise use coefficient-wise kernels whose summation
// order depends on buffer alignment; the GEMM path does not.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "resshift/error.hpp"

namespace resshift::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

bool g_corrupt_conv_backward = false;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* arg) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

struct ConvGeometry {
  int n, cin, h, w, cout, k, stride, pad, ho, wo;
  std::size_t rows() const { return static_cast<std::size_t>(cin) * k * k; }
  std::size_t cols() const { return static_cast<std::size_t>(n) * ho * wo; }
};

void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t ncols = g.cols();
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols + ((static_cast<std::size_t>(ci) * g.k + ky) * g.k + kx) * ncols;
        // valid output columns satisfy 0 <= ox*stride - pad + kx < w
        int ox_lo = 0;
        while (ox_lo < g.wo && ox_lo * g.stride - g.pad + kx < 0) ++ox_lo;
        int ox_hi = g.wo;
        while (ox_hi > ox_lo && (ox_hi - 1) * g.stride - g.pad + kx >= g.w) --ox_hi;
        for (int n = 0; n < g.n; ++n) {
          const double* src = x + (static_cast<std::size_t>(n) * g.cin + ci) * g.h * g.w;
          double* dst_n = row + static_cast<std::size_t>(n) * plane;
          for (int oy = 0; oy < g.ho; ++oy) {
            double* dst = dst_n + static_cast<std::size_t>(oy) * g.wo;
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) {
              std::memset(dst, 0, sizeof(double) * g.wo);
              continue;
            }
            const double* src_row = src + static_cast<std::size_t>(iy) * g.w;
            for (int ox = 0; ox < ox_lo; ++ox) dst[ox] = 0.0;
            if (g.stride == 1) {
              if (ox_hi > ox_lo) {
                std::memcpy(dst + ox_lo, src_row + ox_lo - g.pad + kx,
                            sizeof(double) * (ox_hi - ox_lo));
              }
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] = src_row[ox * g.stride - g.pad + kx];
            }
            for (int ox = ox_hi; ox < g.wo; ++ox) dst[ox] = 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
  const std::size_t ncols = g.cols();
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  for (int ci = 0; ci < g.cin; ++ci) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols + ((static_cast<std::size_t>(ci) * g.k + ky) * g.k + kx) * ncols;
        int ox_lo = 0;
        while (ox_lo < g.wo && ox_lo * g.stride - g.pad + kx < 0) ++ox_lo;
        int ox_hi = g.wo;
        while (ox_hi > ox_lo && (ox_hi - 1) * g.stride - g.pad + kx >= g.w) --ox_hi;
        for (int n = 0; n < g.n; ++n) {
          double* dst = dx + (static_cast<std::size_t>(n) * g.cin + ci) * g.h * g.w;
          const double* src_n = row + static_cast<std::size_t>(n) * plane;
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) continue;
            const double* src = src_n + static_cast<std::size_t>(oy) * g.wo;
            double* dst_row = dst + static_cast<std::size_t>(iy) * g.w;
            for (int ox = ox_lo; ox < ox_hi; ++ox) dst_row[ox * g.stride - g.pad + kx] += src[ox];
          }
        }
      }
    }
  }
}

// Splits the batch into runs of samples whose im2col matrix has about
// kChunkColumns columns, so the working set stays cache-resident.
constexpr std::size_t kChunkColumns = 1024;

template <typename Fn>
void for_each_chunk(const ConvGeometry& g, Fn&& fn) {
  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  const int per_chunk = static_cast<int>(std::max<std::size_t>(1, kChunkColumns / plane));
  std::vector<double> cols, mat;
  for (int n0 = 0; n0 < g.n; n0 += per_chunk) {
    ConvGeometry cg = g;
    cg.n = std::min(per_chunk, g.n - n0);
    cols.resize(cg.rows() * cg.cols());
    mat.resize(static_cast<std::size_t>(g.cout) * cg.cols());
    fn(cg, n0, cols, mat);
  }
}

}  // namespace

namespace testing {
void set_corrupt_conv_backward(bool on) { g_corrupt_conv_backward = on; }
}  // namespace testing

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride) {
  require_rank(x, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require_rank(bias, 1, "conv2d", "bias");
  const int k = weight.dim(2);
  if (k != weight.dim(3) || k % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " +
                     shape_str(weight.shape()));
  }
  if (weight.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, input has " + std::to_string(x.dim(1)));
  }
  if (bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias length does not match output channels");
  }
  if (stride < 1) throw InvalidParameter("conv2d: stride must be positive");

  ConvGeometry g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.k = k;
  g.stride = stride;
  g.pad = k / 2;
  g.ho = (g.h + 2 * g.pad - k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - k) / stride + 1;

  const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
  std::vector<double> out(static_cast<std::size_t>(g.n) * g.cout * plane);
  for_each_chunk(g, [&](const ConvGeometry& cg, int n0, std::vector<double>& cols,
                        std::vector<double>& prod) {
    im2col(x.data().data() + static_cast<std::size_t>(n0) * g.cin * g.h * g.w, cg, cols.data());
    ConstMatMap wm(weight.data().data(), g.cout, static_cast<Eigen::Index>(cg.rows()));
    ConstMatMap cm(cols.data(), static_cast<Eigen::Index>(cg.rows()),
                   static_cast<Eigen::Index>(cg.cols()));
    MatMap pm(prod.data(), g.cout, static_cast<Eigen::Index>(cg.cols()));
    pm.noalias() = wm * cm;
    const double* b = bias.data().data();
    for (int s = 0; s < cg.n; ++s) {
      for (int co = 0; co < g.cout; ++co) {
        const double* src = prod.data() + static_cast<std::size_t>(co) * cg.cols() + s * plane;
        double* dst = out.data() + (static_cast<std::size_t>(n0 + s) * g.cout + co) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + b[co];
      }
    }
  });

  return make_result({g.n, g.cout, g.ho, g.wo}, std::move(out), {x, weight, bias},
                     [g](TensorImpl& self) {
    const std::size_t plane = static_cast<std::size_t>(g.ho) * g.wo;
    TensorImpl& xi = *self.parents[0];
    TensorImpl& wi = *self.parents[1];
    TensorImpl& bi = *self.parents[2];
    std::vector<double> dcols;
    const double wscale = g_corrupt_conv_backward ? 1.01 : 1.0;
    for_each_chunk(g, [&](const ConvGeometry& cg, int n0, std::vector<double>& cols,
                          std::vector<double>& gmat) {
      const auto K = static_cast<Eigen::Index>(cg.rows());
      const auto P = static_cast<Eigen::Index>(cg.cols());
      for (int s = 0; s < cg.n; ++s) {
        for (int co = 0; co < g.cout; ++co) {
          std::memcpy(gmat.data() + static_cast<std::size_t>(co) * cg.cols() + s * plane,
                      self.grad.data() + (static_cast<std::size_t>(n0 + s) * g.cout + co) * plane,
                      sizeof(double) * plane);
        }
      }
      ConstMatMap gm(gmat.data(), g.cout, P);
      if (wi.requires_grad) {
        im2col(xi.data.data() + static_cast<std::size_t>(n0) * g.cin * g.h * g.w, cg, cols.data());
        ConstMatMap cm(cols.data(), K, P);
        MatMap dw(wi.ensure_grad().data(), g.cout, K);
        if (wscale != 1.0) {
          dw.noalias() += wscale * (gm * cm.transpose());
        } else {
          dw.noalias() += gm * cm.transpose();
        }
      }
      if (bi.requires_grad) {
        auto& db = bi.ensure_grad();
        for (int co = 0; co < g.cout; ++co) {
          double acc = 0.0;
          for (Eigen::Index j = 0; j < gm.cols(); ++j) acc += gm(co, j);
          db[co] += acc;
        }
      }
      if (xi.requires_grad) {
        dcols.resize(cols.size());
        ConstMatMap wm(wi.data.data(), g.cout, K);
        MatMap dc(dcols.data(), K, P);
        dc.noalias() = wm.transpose() * gm;
        col2im_add(dcols.data(), cg,
                   xi.ensure_grad().data() + static_cast<std::size_t>(n0) * g.cin * g.h * g.w);
      }
    });
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  require_rank(bias, 1, "linear", "bias");
  const int n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in || bias.dim(0) != out_dim) {
    throw ShapeError("linear: incompatible shapes " + shape_str(x.shape()) + " " +
                     shape_str(weight.shape()) + " " + shape_str(bias.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(n) * out_dim);
  ConstMatMap xm(x.data().data(), n, in);
  ConstMatMap wm(weight.data().data(), out_dim, in);
  MatMap om(out.data(), n, out_dim);
  om.noalias() = xm * wm.transpose();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < out_dim; ++c) om(r, c) += bias.data()[c];
  }
  return make_result({n, out_dim}, std::move(out), {x, weight, bias},
                     [n, in, out_dim](TensorImpl& self) {
                       TensorImpl& xi = *self.parents[0];
                       TensorImpl& wi = *self.parents[1];
                       TensorImpl& bi = *self.parents[2];
                       ConstMatMap gm(self.grad.data(), n, out_dim);
                       if (xi.requires_grad) {
                         MatMap dx(xi.ensure_grad().data(), n, in);
                         ConstMatMap wm(wi.data.data(), out_dim, in);
                         dx.noalias() += gm * wm;
                       }
                       if (wi.requires_grad) {
                         MatMap dw(wi.ensure_grad().data(), out_dim, in);
                         ConstMatMap xm(xi.data.data(), n, in);
                         dw.noalias() += gm.transpose() * xm;
                       }
                       if (bi.requires_grad) {
                         auto& db = bi.ensure_grad();
                         for (int c = 0; c < out_dim; ++c) {
                           double acc = 0.0;
                           for (Eigen::Index r = 0; r < gm.rows(); ++r) acc += gm(r, c);
                           db[c] += acc;
                         }
                       }
                     });
}

Tensor silu(const Tensor& x) {
  // Eigen peels unaligned heads with scalar code whose exp differs from the
  // packet exp in the last bit, so the work runs on Eigen-allocated (aligned)
  // arrays to keep results independent of where the tensor storage landed.
  const auto in = x.data();
  const auto n = static_cast<Eigen::Index>(in.size());
  const Eigen::ArrayXd xa = Eigen::Map<const Eigen::ArrayXd>(in.data(), n);
  auto sig = std::make_shared<Eigen::ArrayXd>(1.0 / (1.0 + (-xa).exp()));
  const Eigen::ArrayXd ya = xa * *sig;
  std::vector<double> out(ya.data(), ya.data() + n);
  return make_result(x.shape(), std::move(out), {x}, [sig, n](TensorImpl& self) {
    TensorImpl& xi = *self.parents[0];
    const Eigen::ArrayXd xa = Eigen::Map<const Eigen::ArrayXd>(xi.data.data(), n);
    const Eigen::ArrayXd ga = Eigen::Map<const Eigen::ArrayXd>(self.grad.data(), n);
    const Eigen::ArrayXd d = ga * *sig * (1.0 + xa * (1.0 - *sig));
    auto& dx = xi.ensure_grad();
    for (Eigen::Index i = 0; i < n; ++i) dx[i] += d[i];
  });
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps) {
  require_rank(x, 4, "group_norm", "input");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  if (groups <= 0 || c % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  if (gamma.numel() != static_cast<std::size_t>(c) || beta.numel() != static_cast<std::size_t>(c)) {
    throw ShapeError("group_norm: affine parameters must have one entry per channel");
  }
  const int cpg = c / groups;
  const std::size_t group_size = static_cast<std::size_t>(cpg) * hw;

  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * groups);
  std::vector<double> out(x.numel());
  const double* xd = x.data().data();
  const double* gd = gamma.data().data();
  const double* bd = beta.data().data();
  for (int s = 0; s < n; ++s) {
    for (int gi = 0; gi < groups; ++gi) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + gi * cpg) * hw;
      double mean = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) mean += xd[base + i];
      mean /= static_cast<double>(group_size);
      double var = 0.0;
      for (std::size_t i = 0; i < group_size; ++i) {
        const double d = xd[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(group_size);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<std::size_t>(s) * groups + gi] = is;
      for (int cc = 0; cc < cpg; ++cc) {
        const int ch = gi * cpg + cc;
        const std::size_t off = base + cc * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double xh = (xd[off + i] - mean) * is;
          (*xhat)[off + i] = xh;
          out[off + i] = xh * gd[ch] + bd[ch];
        }
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [n, c, groups, cpg, hw, group_size, xhat, inv_std](TensorImpl& self) {
        TensorImpl& xi = *self.parents[0];
        TensorImpl& gi_ = *self.parents[1];
        TensorImpl& bi = *self.parents[2];
        const double* dy = self.grad.data();
        const double* xh = xhat->data();
        if (gi_.requires_grad || bi.requires_grad) {
          auto& dg = gi_.ensure_grad();
          auto& db = bi.ensure_grad();
          for (int s = 0; s < n; ++s) {
            for (int ch = 0; ch < c; ++ch) {
              const std::size_t off = (static_cast<std::size_t>(s) * c + ch) * hw;
              double sg = 0.0, sb = 0.0;
              for (std::size_t i = 0; i < hw; ++i) {
                sg += dy[off + i] * xh[off + i];
                sb += dy[off + i];
              }
              dg[ch] += sg;
              db[ch] += sb;
            }
          }
        }
        if (!xi.requires_grad) return;
        auto& dx = xi.ensure_grad();
        const double* gd = gi_.data.data();
        for (int s = 0; s < n; ++s) {
          for (int g = 0; g < groups; ++g) {
            const std::size_t base = (static_cast<std::size_t>(s) * c + g * cpg) * hw;
            double mean_d = 0.0, mean_dx = 0.0;
            for (int cc = 0; cc < cpg; ++cc) {
              const double gam = gd[g * cpg + cc];
              const std::size_t off = base + cc * hw;
              for (std::size_t i = 0; i < hw; ++i) {
                const double d = dy[off + i] * gam;
                mean_d += d;
                mean_dx += d * xh[off + i];
              }
            }
            mean_d /= static_cast<double>(group_size);
            mean_dx /= static_cast<double>(group_size);
            const double is = (*inv_std)[static_cast<std::size_t>(s) * groups + g];
            for (int cc = 0; cc < cpg; ++cc) {
              const double gam = gd[g * cpg + cc];
              const std::size_t off = base + cc * hw;
              for (std::size_t i = 0; i < hw; ++i) {
                const double d = dy[off + i] * gam;
                dx[off + i] += is * (d - mean_d - xh[off + i] * mean_dx);
              }
            }
          }
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& v) {
  require_rank(x, 4, "add_channel_bias", "input");
  require_rank(v, 2, "add_channel_bias", "bias");
  const int n = x.dim(0), c = x.dim(1);
  if (v.dim(0) != n || v.dim(1) != c) {
    throw ShapeError("add_channel_bias: bias " + shape_str(v.shape()) + " does not match " +
                     shape_str(x.shape()));
  }
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto vd = v.data();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
    for (std::size_t i = 0; i < hw; ++i) out[nc * hw + i] += vd[nc];
  }
  return make_result(x.shape(), std::move(out), {x, v}, [n, c, hw](TensorImpl& self) {
    TensorImpl& xi = *self.parents[0];
    TensorImpl& vi = *self.parents[1];
    if (xi.requires_grad) {
      auto& g = xi.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (vi.requires_grad) {
      auto& g = vi.ensure_grad();
      for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += self.grad[nc * hw + i];
        g[nc] += s;
      }
    }
  });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_rank(x, 4, "upsample_nearest2x", "input");
  const int nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const int h2 = 2 * h, w2 = 2 * w;
  std::vector<double> out(static_cast<std::size_t>(nc) * h2 * w2);
  const auto xd = x.data();
  for (int p = 0; p < nc; ++p) {
    for (int y = 0; y < h2; ++y) {
      const double* src = xd.data() + (static_cast<std::size_t>(p) * h + y / 2) * w;
      double* dst = out.data() + (static_cast<std::size_t>(p) * h2 + y) * w2;
      for (int xx = 0; xx < w2; ++xx) dst[xx] = src[xx / 2];
    }
  }
  return make_result({x.dim(0), x.dim(1), h2, w2}, std::move(out), {x},
                     [nc, h, w](TensorImpl& self) {
                       TensorImpl& xi = *self.parents[0];
                       auto& g = xi.ensure_grad();
                       const int w2 = 2 * w;
                       for (int p = 0; p < nc; ++p) {
                         for (int y = 0; y < 2 * h; ++y) {
                           const double* src =
                               self.grad.data() + (static_cast<std::size_t>(p) * 2 * h + y) * w2;
                           double* dst = g.data() + (static_cast<std::size_t>(p) * h + y / 2) * w;
                           for (int xx = 0; xx < w2; ++xx) dst[xx / 2] += src[xx];
                         }
                       }
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels", "a");
  require_rank(b, 4, "concat_channels", "b");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  const std::size_t sa = ca * hw, sb = cb * hw;
  std::vector<double> out(static_cast<std::size_t>(n) * (sa + sb));
  for (int s = 0; s < n; ++s) {
    std::memcpy(out.data() + s * (sa + sb), a.data().data() + s * sa, sizeof(double) * sa);
    std::memcpy(out.data() + s * (sa + sb) + sa, b.data().data() + s * sb, sizeof(double) * sb);
  }
  return make_result({n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                     [n, sa, sb](TensorImpl& self) {
                       TensorImpl& ai = *self.parents[0];
                       TensorImpl& bi = *self.parents[1];
                       for (int s = 0; s < n; ++s) {
                         const double* src = self.grad.data() + s * (sa + sb);
                         if (ai.requires_grad) {
                           double* d = ai.ensure_grad().data() + s * sa;
                           for (std::size_t i = 0; i < sa; ++i) d[i] += src[i];
                         }
                         if (bi.requires_grad) {
                           double* d = bi.ensure_grad().data() + s * sb;
                           for (std::size_t i = 0; i < sb; ++i) d[i] += src[sa + i];
                         }
                       }
                     });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, std::span<const double> sample_weights) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  const int n = pred.dim(0);
  if (!sample_weights.empty() && sample_weights.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("mse_loss: one weight per sample required");
  }
  const std::size_t per = pred.numel() / static_cast<std::size_t>(n);
  std::vector<double> coef(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const double w = sample_weights.empty() ? 1.0 : sample_weights[s];
    coef[s] = w / (static_cast<double>(n) * static_cast<double>(per));
  }
  const auto p = pred.data();
  const auto t = target.data();
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    double acc = 0.0;
    for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
      const double d = p[i] - t[i];
      acc += d * d;
    }
    total += coef[s] * acc;
  }
  std::vector<double> target_copy(t.begin(), t.end());
  return make_result({1}, {total}, {pred},
                     [coef = std::move(coef), per, target_copy = std::move(target_copy)](
                         TensorImpl& self) {
                       TensorImpl& pi = *self.parents[0];
                       auto& g = pi.ensure_grad();
                       const double up = self.grad[0];
                       for (std::size_t s = 0; s < coef.size(); ++s) {
                         const double c2 = 2.0 * coef[s] * up;
                         for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
                           g[i] += c2 * (pi.data[i] - target_copy[i]);
                         }
                       }
                     });
}

Tensor inner(const Tensor& x, std::span<const double> coeffs) {
  if (coeffs.size() != x.numel()) throw ShapeError("inner: coefficient count mismatch");
  double s = 0.0;
  const auto xd = x.data();
  for (std::size_t i = 0; i < xd.size(); ++i) s += xd[i] * coeffs[i];
  std::vector<double> c(coeffs.begin(), coeffs.end());
  return make_result({1}, {s}, {x}, [c = std::move(c)](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * c[i];
  });
}

}  // namespace resshift::nn
