#include "spectral/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <utility>
#include <cmath>

namespace spectral {
namespace ops {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat map2(const Tensor& t) {
  return CMapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                 static_cast<Eigen::Index>(t.cols()));
}

MapMat map2(Tensor& t) {
  return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

VarPtr make_op(Tensor value, std::vector<VarPtr> parents,
               std::function<void(Var&)> backward_fn) {
  auto v = std::make_shared<Var>();
  v->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) v->requires_grad = true;
  v->parents = std::move(parents);
  if (v->requires_grad) v->backward_fn = std::move(backward_fn);
  return v;
}

bool wants(const VarPtr& p) { return p->requires_grad; }

double stable_sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Sigmoid clamped away from 0 and 1 so scaled outputs stay strictly
// inside their range even when the exponential saturates.
double interior_sigmoid(double x) {
  return std::clamp(stable_sigmoid(x), 1e-15, 1.0 - 1e-15);
}

}  // namespace

// ---- structural / arithmetic -------------------------------------------

VarPtr add(const VarPtr& a, const VarPtr& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch");
  Tensor out = a->value;
  out.add_inplace(b->value);
  return make_op(std::move(out), {a, b}, [a, b](Var& self) {
    if (wants(a)) a->grad.add_inplace(self.grad);
    if (wants(b)) b->grad.add_inplace(self.grad);
  });
}

VarPtr add_rowvec(const VarPtr& m, const VarPtr& v) {
  require(m->value.ndim() == 2 && v->value.ndim() == 1 &&
              m->value.cols() == v->value.size(),
          "add_rowvec: shape mismatch");
  Tensor out = m->value;
  std::size_t r = out.rows(), c = out.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += v->value[j];
  return make_op(std::move(out), {m, v}, [m, v, r, c](Var& self) {
    if (wants(m)) m->grad.add_inplace(self.grad);
    if (wants(v)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          v->grad[j] += self.grad.at(i, j);
    }
  });
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Var& self) {
    if (wants(a)) a->grad.add_inplace(self.grad);
    if (wants(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        b->grad[i] -= self.grad[i];
  });
}

VarPtr mul(const VarPtr& a, const VarPtr& b) {
  require(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Var& self) {
    if (wants(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        a->grad[i] += self.grad[i] * b->value[i];
    if (wants(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        b->grad[i] += self.grad[i] * a->value[i];
  });
}

VarPtr scale(const VarPtr& a, double s) {
  Tensor out = a->value;
  out.scale_inplace(s);
  return make_op(std::move(out), {a}, [a, s](Var& self) {
    if (!wants(a)) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      a->grad[i] += self.grad[i] * s;
  });
}

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
  require(a->value.ndim() == 2 && b->value.ndim() == 2 &&
              a->value.cols() == b->value.rows(),
          "matmul: inner dimension mismatch");
  Tensor out({a->value.rows(), b->value.cols()});
  map2(out).noalias() = map2(a->value) * map2(b->value);
  return make_op(std::move(out), {a, b}, [a, b](Var& self) {
    CMapMat g = map2(std::as_const(self.grad));
    if (wants(a)) map2(a->grad).noalias() += g * map2(b->value).transpose();
    if (wants(b)) map2(b->grad).noalias() += map2(a->value).transpose() * g;
  });
}

VarPtr slice_cols(const VarPtr& x, std::size_t c0, std::size_t c1) {
  require(x->value.ndim() == 2 && c0 < c1 && c1 <= x->value.cols(),
          "slice_cols: bad range");
  std::size_t r = x->value.rows(), w = c1 - c0;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = x->value.at(i, c0 + j);
  return make_op(std::move(out), {x}, [x, c0, r, w](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j)
        x->grad.at(i, c0 + j) += self.grad.at(i, j);
  });
}

VarPtr concat_cols(const VarPtr& a, const VarPtr& b) {
  require(a->value.ndim() == 2 && b->value.ndim() == 2 &&
              a->value.rows() == b->value.rows(),
          "concat_cols: row mismatch");
  std::size_t r = a->value.rows(), ca = a->value.cols(), cb = b->value.cols();
  Tensor out({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = a->value.at(i, j);
    for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = b->value.at(i, j);
  }
  return make_op(std::move(out), {a, b}, [a, b, r, ca, cb](Var& self) {
    if (wants(a))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < ca; ++j)
          a->grad.at(i, j) += self.grad.at(i, j);
    if (wants(b))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cb; ++j)
          b->grad.at(i, j) += self.grad.at(i, ca + j);
  });
}

VarPtr gather_rows(const VarPtr& x, std::vector<std::size_t> rows) {
  require(x->value.ndim() == 2, "gather_rows: rank-2 input expected");
  std::size_t c = x->value.cols();
  Tensor out({rows.size(), c});
  for (std::size_t j = 0; j < rows.size(); ++j) {
    require(rows[j] < x->value.rows(), "gather_rows: index out of range");
    for (std::size_t k = 0; k < c; ++k) out.at(j, k) = x->value.at(rows[j], k);
  }
  return make_op(std::move(out), {x},
                 [x, rows = std::move(rows), c](Var& self) {
                   if (!wants(x)) return;
                   for (std::size_t j = 0; j < rows.size(); ++j)
                     for (std::size_t k = 0; k < c; ++k)
                       x->grad.at(rows[j], k) += self.grad.at(j, k);
                 });
}

VarPtr sum_all(const VarPtr& x) {
  Tensor out = Tensor::scalar(x->value.sum());
  return make_op(std::move(out), {x}, [x](Var& self) {
    if (!wants(x)) return;
    double g = self.grad[0];
    for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
  });
}

VarPtr mean_all(const VarPtr& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x->value.size()));
}

// ---- nonlinearities ----------------------------------------------------

VarPtr relu(const VarPtr& x) {
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return make_op(std::move(out), {x}, [x](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (self.value[i] > 0.0) x->grad[i] += self.grad[i];
  });
}

VarPtr sigmoid(const VarPtr& x) {
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
  return make_op(std::move(out), {x}, [x](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double s = self.value[i];
      x->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

VarPtr softplus(const VarPtr& x) {
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = out[i];
    out[i] = v > 30.0 ? v : (v < -30.0 ? std::exp(v) : std::log1p(std::exp(v)));
  }
  return make_op(std::move(out), {x}, [x](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      x->grad[i] += self.grad[i] * stable_sigmoid(x->value[i]);
  });
}

VarPtr scaled_sigmoid(const VarPtr& x, double lo, double hi) {
  require(lo < hi, "scaled_sigmoid: lo must be < hi");
  Tensor out = x->value;
  double span = hi - lo;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = lo + span * interior_sigmoid(out[i]);
  return make_op(std::move(out), {x}, [x, lo, span](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double s = (self.value[i] - lo) / span;
      x->grad[i] += self.grad[i] * span * s * (1.0 - s);
    }
  });
}

VarPtr softmax_rows(const VarPtr& x) {
  require(x->value.ndim() == 2, "softmax_rows: rank-2 input expected");
  std::size_t r = x->value.rows(), c = x->value.cols();
  Tensor out = x->value;
  for (std::size_t i = 0; i < r; ++i) {
    double mx = out.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double e = std::exp(out.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  return make_op(std::move(out), {x}, [x, r, c](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j)
        dot += self.grad.at(i, j) * self.value.at(i, j);
      for (std::size_t j = 0; j < c; ++j)
        x->grad.at(i, j) +=
            self.value.at(i, j) * (self.grad.at(i, j) - dot);
    }
  });
}

// ---- normalization / regularization ------------------------------------

VarPtr layer_norm_rows(const VarPtr& x, const VarPtr& gain, const VarPtr& bias,
                       double eps) {
  require(x->value.ndim() == 2, "layer_norm: rank-2 input expected");
  std::size_t r = x->value.rows(), c = x->value.cols();
  require(gain->value.size() == c && bias->value.size() == c,
          "layer_norm: affine width mismatch");
  Tensor out({r, c});
  Tensor xhat({r, c});
  Tensor inv_sd({r});
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x->value.at(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double d = x->value.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    double is = 1.0 / std::sqrt(var + eps);
    inv_sd[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      double xh = (x->value.at(i, j) - mu) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = gain->value[j] * xh + bias->value[j];
    }
  }
  return make_op(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_sd = std::move(inv_sd), r,
       c](Var& self) {
        for (std::size_t i = 0; i < r; ++i) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            double dyg = self.grad.at(i, j) * gain->value[j];
            m1 += dyg;
            m2 += dyg * xhat.at(i, j);
          }
          m1 /= static_cast<double>(c);
          m2 /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            double dyg = self.grad.at(i, j) * gain->value[j];
            if (wants(x))
              x->grad.at(i, j) +=
                  inv_sd[i] * (dyg - m1 - xhat.at(i, j) * m2);
            if (wants(gain))
              gain->grad[j] += self.grad.at(i, j) * xhat.at(i, j);
            if (wants(bias)) bias->grad[j] += self.grad.at(i, j);
          }
        }
      });
}

VarPtr batch_norm(const VarPtr& x, const VarPtr& gamma, const VarPtr& beta,
                  const VarPtr& running_mean, const VarPtr& running_var,
                  bool training, double momentum, double eps) {
  require(x->value.ndim() == 2, "batch_norm: rank-2 input expected");
  std::size_t n = x->value.rows(), f = x->value.cols();
  require(gamma->value.size() == f && beta->value.size() == f &&
              running_mean->value.size() == f && running_var->value.size() == f,
          "batch_norm: feature width mismatch");

  if (!training) {
    // Deterministic affine map from the running statistics.
    Tensor out({n, f});
    Tensor xhat({n, f});
    for (std::size_t j = 0; j < f; ++j) {
      double is = 1.0 / std::sqrt(running_var->value[j] + eps);
      double mu = running_mean->value[j];
      for (std::size_t i = 0; i < n; ++i) {
        double xh = (x->value.at(i, j) - mu) * is;
        xhat.at(i, j) = xh;
        out.at(i, j) = gamma->value[j] * xh + beta->value[j];
      }
    }
    Tensor inv_sd({f});
    for (std::size_t j = 0; j < f; ++j)
      inv_sd[j] = 1.0 / std::sqrt(running_var->value[j] + eps);
    return make_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat = std::move(xhat),
                    inv_sd = std::move(inv_sd), n, f](Var& self) {
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < f; ++j) {
                         double g = self.grad.at(i, j);
                         if (wants(x))
                           x->grad.at(i, j) += g * gamma->value[j] * inv_sd[j];
                         if (wants(gamma)) gamma->grad[j] += g * xhat.at(i, j);
                         if (wants(beta)) beta->grad[j] += g;
                       }
                   });
  }

  Tensor mu({f}), var({f});
  for (std::size_t j = 0; j < f; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x->value.at(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = x->value.at(i, j) - m;
      v += d * d;
    }
    v /= static_cast<double>(n);
    mu[j] = m;
    var[j] = v;
  }
  // Update running statistics in place (unbiased variance, torch-style).
  double unbias = n > 1 ? static_cast<double>(n) / (n - 1.0) : 1.0;
  for (std::size_t j = 0; j < f; ++j) {
    running_mean->value[j] =
        (1.0 - momentum) * running_mean->value[j] + momentum * mu[j];
    running_var->value[j] =
        (1.0 - momentum) * running_var->value[j] + momentum * var[j] * unbias;
  }

  Tensor out({n, f});
  Tensor xhat({n, f});
  Tensor inv_sd({f});
  for (std::size_t j = 0; j < f; ++j) {
    double is = 1.0 / std::sqrt(var[j] + eps);
    inv_sd[j] = is;
    for (std::size_t i = 0; i < n; ++i) {
      double xh = (x->value.at(i, j) - mu[j]) * is;
      xhat.at(i, j) = xh;
      out.at(i, j) = gamma->value[j] * xh + beta->value[j];
    }
  }
  return make_op(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_sd = std::move(inv_sd), n,
       f](Var& self) {
        for (std::size_t j = 0; j < f; ++j) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            double g = self.grad.at(i, j);
            m1 += g;
            m2 += g * xhat.at(i, j);
          }
          if (wants(gamma)) gamma->grad[j] += m2;
          if (wants(beta)) beta->grad[j] += m1;
          if (wants(x)) {
            m1 /= static_cast<double>(n);
            m2 /= static_cast<double>(n);
            double k = gamma->value[j] * inv_sd[j];
            for (std::size_t i = 0; i < n; ++i)
              x->grad.at(i, j) += k * (self.grad.at(i, j) - m1 -
                                       xhat.at(i, j) * m2);
          }
        }
      });
}

VarPtr dropout(const VarPtr& x, double rate, std::mt19937_64& rng,
               bool training) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x->value.shape());
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double m = u(rng) < rate ? 0.0 : keep_scale;
    mask[i] = m;
    out[i] *= m;
  }
  return make_op(std::move(out), {x}, [x, mask = std::move(mask)](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      x->grad[i] += self.grad[i] * mask[i];
  });
}

// ---- sequence ops --------------------------------------------------------

VarPtr token_embed(const VarPtr& x, const VarPtr& w, const VarPtr& b,
                   const Tensor& pos) {
  require(x->value.ndim() == 2, "token_embed: [B x L] input expected");
  std::size_t batch = x->value.rows(), seq = x->value.cols();
  std::size_t d = w->value.size();
  require(b->value.size() == d, "token_embed: bias width mismatch");
  require(pos.rows() == seq && pos.cols() == d,
          "token_embed: positional table mismatch");
  Tensor out({batch * seq, d});
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t t = 0; t < seq; ++t) {
      double s = x->value.at(i, t);
      std::size_t r = i * seq + t;
      for (std::size_t j = 0; j < d; ++j)
        out.at(r, j) = s * w->value[j] + b->value[j] + pos.at(t, j);
    }
  return make_op(std::move(out), {x, w, b},
                 [x, w, b, batch, seq, d](Var& self) {
                   for (std::size_t i = 0; i < batch; ++i)
                     for (std::size_t t = 0; t < seq; ++t) {
                       std::size_t r = i * seq + t;
                       double dot = 0.0;
                       for (std::size_t j = 0; j < d; ++j) {
                         double g = self.grad.at(r, j);
                         dot += g * w->value[j];
                         if (wants(w))
                           w->grad[j] += g * x->value.at(i, t);
                         if (wants(b)) b->grad[j] += g;
                       }
                       if (wants(x)) x->grad.at(i, t) += dot;
                     }
                 });
}

VarPtr scaled_attention(const VarPtr& q, const VarPtr& k, const VarPtr& v,
                        std::size_t batch, std::size_t seq_len,
                        std::size_t heads, Tensor* weights_out) {
  std::size_t d = q->value.cols();
  require(q->value.same_shape(k->value) && q->value.same_shape(v->value),
          "attention: q/k/v shape mismatch");
  require(q->value.rows() == batch * seq_len,
          "attention: rows != batch * seq_len");
  require(heads > 0 && d % heads == 0, "attention: model_dim % heads != 0");
  std::size_t hd = d / heads;
  double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // Attention probabilities are kept for the backward pass:
  // one [L x L] block per (sample, head).
  Tensor probs({batch * heads * seq_len, seq_len});
  Tensor out({batch * seq_len, d});

  Eigen::MatrixXd scores(seq_len, seq_len);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      // Non-contiguous column block: use strided maps.
      Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Qs(
          q->value.data() + i * seq_len * d + h * hd, seq_len, hd,
          Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Ks(
          k->value.data() + i * seq_len * d + h * hd, seq_len, hd,
          Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Vs(
          v->value.data() + i * seq_len * d + h * hd, seq_len, hd,
          Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      scores.noalias() = (Qs * Ks.transpose()).eval() * inv_scale;
      MapMat P(probs.data() + (i * heads + h) * seq_len * seq_len, seq_len,
               seq_len);
      for (Eigen::Index r = 0; r < P.rows(); ++r) {
        double mx = scores.row(r).maxCoeff();
        P.row(r) = (scores.row(r).array() - mx).exp().matrix();
        P.row(r) /= P.row(r).sum();
      }
      Eigen::Map<RowMat, 0, Eigen::OuterStride<>> Os(
          out.data() + i * seq_len * d + h * hd, seq_len, hd,
          Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      Os.noalias() = P * Vs;
    }
  }
  if (weights_out) *weights_out = probs;

  return make_op(
      std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), batch, seq_len, heads, hd, d,
       inv_scale](Var& self) {
        Eigen::MatrixXd dA(seq_len, seq_len), dS(seq_len, seq_len);
        for (std::size_t i = 0; i < batch; ++i) {
          for (std::size_t h = 0; h < heads; ++h) {
            auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(d));
            std::size_t off = i * seq_len * d + h * hd;
            Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Qs(
                q->value.data() + off, seq_len, hd, stride);
            Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Ks(
                k->value.data() + off, seq_len, hd, stride);
            Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> Vs(
                v->value.data() + off, seq_len, hd, stride);
            Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> dO(
                self.grad.data() + off, seq_len, hd, stride);
            CMapMat P(probs.data() + (i * heads + h) * seq_len * seq_len,
                      seq_len, seq_len);

            if (wants(v)) {
              Eigen::Map<RowMat, 0, Eigen::OuterStride<>> dV(
                  v->grad.data() + off, seq_len, hd, stride);
              dV.noalias() += P.transpose() * dO;
            }
            dA.noalias() = dO * Vs.transpose();
            // Softmax backward per row.
            for (Eigen::Index r = 0; r < dS.rows(); ++r) {
              double dot = dA.row(r).cwiseProduct(P.row(r)).sum();
              dS.row(r) =
                  (P.row(r).array() * (dA.row(r).array() - dot)).matrix() *
                  inv_scale;
            }
            if (wants(q)) {
              Eigen::Map<RowMat, 0, Eigen::OuterStride<>> dQ(
                  q->grad.data() + off, seq_len, hd, stride);
              dQ.noalias() += dS * Ks;
            }
            if (wants(k)) {
              Eigen::Map<RowMat, 0, Eigen::OuterStride<>> dK(
                  k->grad.data() + off, seq_len, hd, stride);
              dK.noalias() += dS.transpose() * Qs;
            }
          }
        }
      });
}

VarPtr mean_pool_blocks(const VarPtr& x, std::size_t batch,
                        std::size_t seq_len) {
  require(x->value.ndim() == 2 && x->value.rows() == batch * seq_len,
          "mean_pool: rows != batch * seq_len");
  std::size_t d = x->value.cols();
  Tensor out({batch, d});
  double inv = 1.0 / static_cast<double>(seq_len);
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t t = 0; t < seq_len; ++t)
      for (std::size_t j = 0; j < d; ++j)
        out.at(i, j) += x->value.at(i * seq_len + t, j) * inv;
  return make_op(std::move(out), {x}, [x, batch, seq_len, d, inv](Var& self) {
    if (!wants(x)) return;
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t t = 0; t < seq_len; ++t)
        for (std::size_t j = 0; j < d; ++j)
          x->grad.at(i * seq_len + t, j) += self.grad.at(i, j) * inv;
  });
}

// ---- losses --------------------------------------------------------------

VarPtr huber_loss(const VarPtr& pred, const Tensor& target, double delta) {
  require(pred->value.size() == target.size() && target.size() > 0,
          "huber: length mismatch or empty");
  std::size_t n = pred->value.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = pred->value[i] - target[i];
    double a = std::abs(r);
    acc += a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(std::move(out), {pred}, [pred, target, delta, n](Var& self) {
    if (!wants(pred)) return;
    double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double r = pred->value[i] - target[i];
      double d = std::abs(r) <= delta ? r : delta * (r > 0 ? 1.0 : -1.0);
      pred->grad[i] += g * d;
    }
  });
}

namespace {

VarPtr smooth_l1_impl(const VarPtr& a, const VarPtr& b_var, const Tensor& b,
                      double delta) {
  require(a->value.size() == b.size() && b.size() > 0,
          "smooth_l1: length mismatch or empty");
  require(delta > 0.0, "smooth_l1: delta must be positive");
  std::size_t n = a->value.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a->value[i] - b[i];
    double ad = std::abs(d);
    acc += ad < delta ? 0.5 * d * d / delta : ad - 0.5 * delta;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  std::vector<VarPtr> parents = {a};
  if (b_var) parents.push_back(b_var);
  return make_op(std::move(out), std::move(parents),
                 [a, b_var, b, delta, n](Var& self) {
                   double g = self.grad[0] / static_cast<double>(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     double d = a->value[i] - b[i];
                     double dd = std::abs(d) < delta
                                     ? d / delta
                                     : (d > 0 ? 1.0 : -1.0);
                     if (wants(a)) a->grad[i] += g * dd;
                     if (b_var && wants(b_var)) b_var->grad[i] -= g * dd;
                   }
                 });
}

}  // namespace

VarPtr smooth_l1_loss(const VarPtr& a, const VarPtr& b, double delta) {
  return smooth_l1_impl(a, b, b->value, delta);
}

VarPtr smooth_l1_loss(const VarPtr& a, const Tensor& b, double delta) {
  return smooth_l1_impl(a, nullptr, b, delta);
}

VarPtr recon_mse(const VarPtr& recon, const Tensor& target) {
  require(recon->value.same_shape(target), "recon_mse: shape mismatch");
  require(recon->value.rows() > 0, "recon_mse: empty batch");
  std::size_t n = recon->value.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < recon->value.size(); ++i) {
    double d = recon->value[i] - target[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(std::move(out), {recon}, [recon, target, n](Var& self) {
    if (!wants(recon)) return;
    double g = 2.0 * self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < recon->value.size(); ++i)
      recon->grad[i] += g * (recon->value[i] - target[i]);
  });
}

VarPtr cosine_align(const VarPtr& u, const VarPtr& v) {
  require(u->value.same_shape(v->value) && u->value.ndim() == 2,
          "cosine_align: paired [B x d] inputs expected");
  std::size_t n = u->value.rows(), d = u->value.cols();
  require(n > 0, "cosine_align: empty pair batch");
  Tensor nu({n}), nv({n}), cosv({n});
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double su = 0.0, sv = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double a = u->value.at(i, j), b = v->value.at(i, j);
      su += a * a;
      sv += b * b;
      dot += a * b;
    }
    require(su > 0.0 && sv > 0.0, "cosine_align: zero embedding");
    nu[i] = std::sqrt(su);
    nv[i] = std::sqrt(sv);
    cosv[i] = dot / (nu[i] * nv[i]);
    acc += 1.0 - cosv[i];
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(std::move(out), {u, v},
                 [u, v, nu = std::move(nu), nv = std::move(nv),
                  cosv = std::move(cosv), n, d](Var& self) {
                   double g = self.grad[0] / static_cast<double>(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     double inv_uv = 1.0 / (nu[i] * nv[i]);
                     for (std::size_t j = 0; j < d; ++j) {
                       double a = u->value.at(i, j), b = v->value.at(i, j);
                       if (wants(u))
                         u->grad.at(i, j) -=
                             g * (b * inv_uv - cosv[i] * a / (nu[i] * nu[i]));
                       if (wants(v))
                         v->grad.at(i, j) -=
                             g * (a * inv_uv - cosv[i] * b / (nv[i] * nv[i]));
                     }
                   }
                 });
}

VarPtr kl_batch_softmax(const Tensor& teacher_preds,
                        const VarPtr& student_preds) {
  std::size_t n = teacher_preds.size();
  require(n == student_preds->value.size(), "kl: length mismatch");
  require(n >= 2, "kl: batch of size 1 gives a degenerate distribution");
  std::vector<double> t(teacher_preds.data(), teacher_preds.data() + n);
  std::vector<double> s(student_preds->value.data(),
                        student_preds->value.data() + n);
  auto p = softmax(t);
  auto q = softmax(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += p[i] * (std::log(p[i]) - std::log(q[i]));
  Tensor out = Tensor::scalar(acc);
  return make_op(std::move(out), {student_preds},
                 [student_preds, p = std::move(p), q = std::move(q),
                  n](Var& self) {
                   if (!wants(student_preds)) return;
                   double g = self.grad[0];
                   for (std::size_t i = 0; i < n; ++i)
                     student_preds->grad[i] += g * (q[i] - p[i]);
                 });
}

namespace {

// Row-wise softmax of a [B x d] tensor into plain storage.
Tensor rows_softmax(const Tensor& x) {
  Tensor out = x;
  std::size_t r = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = out.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      z += out.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  return out;
}

}  // namespace

VarPtr kl_align(const VarPtr& u, const VarPtr& v) {
  require(u->value.same_shape(v->value) && u->value.ndim() == 2,
          "kl_align: paired [B x d] inputs expected");
  std::size_t n = u->value.rows(), d = u->value.cols();
  Tensor p = rows_softmax(u->value);
  Tensor q = rows_softmax(v->value);
  Tensor row_kl({n});
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      s += p.at(i, j) * (std::log(p.at(i, j)) - std::log(q.at(i, j)));
    row_kl[i] = s;
    acc += s;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(std::move(out), {u, v},
                 [u, v, p = std::move(p), q = std::move(q),
                  row_kl = std::move(row_kl), n, d](Var& self) {
                   double g = self.grad[0] / static_cast<double>(n);
                   for (std::size_t i = 0; i < n; ++i)
                     for (std::size_t j = 0; j < d; ++j) {
                       double pij = p.at(i, j), qij = q.at(i, j);
                       if (wants(u))
                         u->grad.at(i, j) +=
                             g * pij *
                             ((std::log(pij) - std::log(qij)) - row_kl[i]);
                       if (wants(v)) v->grad.at(i, j) += g * (qij - pij);
                     }
                 });
}

VarPtr jsd_align(const VarPtr& u, const VarPtr& v) {
  require(u->value.same_shape(v->value) && u->value.ndim() == 2,
          "jsd_align: paired [B x d] inputs expected");
  std::size_t n = u->value.rows(), d = u->value.cols();
  Tensor p = rows_softmax(u->value);
  Tensor q = rows_softmax(v->value);
  Tensor dp({n, d}), dq({n, d});  // dJSD/dp_k and dJSD/dq_k per row
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.5 * (p.at(i, j) + q.at(i, j));
      s += 0.5 * p.at(i, j) * std::log(p.at(i, j) / m) +
           0.5 * q.at(i, j) * std::log(q.at(i, j) / m);
      dp.at(i, j) = 0.5 * std::log(p.at(i, j) / m);
      dq.at(i, j) = 0.5 * std::log(q.at(i, j) / m);
    }
    acc += s;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(
      std::move(out), {u, v},
      [u, v, p = std::move(p), q = std::move(q), dp = std::move(dp),
       dq = std::move(dq), n, d](Var& self) {
        double g = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          double su = 0.0, sv = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            su += dp.at(i, j) * p.at(i, j);
            sv += dq.at(i, j) * q.at(i, j);
          }
          for (std::size_t j = 0; j < d; ++j) {
            if (wants(u))
              u->grad.at(i, j) += g * p.at(i, j) * (dp.at(i, j) - su);
            if (wants(v))
              v->grad.at(i, j) += g * q.at(i, j) * (dq.at(i, j) - sv);
          }
        }
      });
}

// ---- plain-tensor helpers --------------------------------------------------

Tensor sinusoidal_positional_encoding(std::size_t seq_len,
                                      std::size_t model_dim) {
  require(seq_len >= 1, "positional encoding: seq_len must be >= 1");
  require(model_dim >= 2 && model_dim % 2 == 0,
          "positional encoding: model_dim must be even");
  Tensor pe({seq_len, model_dim});
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t i = 0; i < model_dim / 2; ++i) {
      double rate = std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                          static_cast<double>(model_dim));
      double angle = static_cast<double>(pos) / rate;
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

std::vector<double> softmax(const std::vector<double>& v) {
  require(!v.empty(), "softmax: empty vector");
  double mx = v[0];
  for (double x : v) {
    require(std::isfinite(x), "softmax: non-finite entry");
    mx = std::max(mx, x);
  }
  std::vector<double> out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    z += out[i];
  }
  for (auto& x : out) x /= z;
  return out;
}

double cosine_distance(const std::vector<double>& u,
                       const std::vector<double>& v) {
  require(u.size() == v.size() && !u.empty(), "cosine: length mismatch");
  double su = 0.0, sv = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    su += u[i] * u[i];
    sv += v[i] * v[i];
    dot += u[i] * v[i];
  }
  require(su > 0.0 && sv > 0.0, "cosine: undefined angle for zero vector");
  return 1.0 - dot / (std::sqrt(su) * std::sqrt(sv));
}

double scaled_sigmoid_value(double z, double lo, double hi) {
  require(lo < hi, "scaled_sigmoid: lo must be < hi");
  return lo + (hi - lo) * interior_sigmoid(z);
}

}  // namespace ops
}  // namespace spectral
