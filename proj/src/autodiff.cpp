#include "dbrn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "dbrn/errors.hpp"

namespace dbrn::ag {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw param_error(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                    shape_str(b));
}

Tensor make(const char* op, Shape shape, std::vector<double> value,
            std::vector<Tensor> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

// Right-aligned broadcast of two shapes; strides are 0 along broadcast dims.
struct Bcast {
  Shape out;
  std::vector<std::size_t> sa, sb;  // element strides per out dim
};

Bcast broadcast_shapes(const char* op, const Shape& a, const Shape& b) {
  const std::size_t nd = std::max(a.size(), b.size());
  Bcast bc;
  bc.out.resize(nd);
  bc.sa.assign(nd, 0);
  bc.sb.assign(nd, 0);
  std::vector<std::size_t> stride_a(a.size()), stride_b(b.size());
  std::size_t acc = 1;
  for (std::size_t i = a.size(); i-- > 0;) {
    stride_a[i] = acc;
    acc *= a[i];
  }
  acc = 1;
  for (std::size_t i = b.size(); i-- > 0;) {
    stride_b[i] = acc;
    acc *= b[i];
  }
  for (std::size_t d = 0; d < nd; ++d) {
    const bool ha = d >= nd - a.size();
    const bool hb = d >= nd - b.size();
    const std::size_t da = ha ? a[d - (nd - a.size())] : 1;
    const std::size_t db = hb ? b[d - (nd - b.size())] : 1;
    if (da != db && da != 1 && db != 1) shape_fail(op, a, b);
    bc.out[d] = std::max(da, db);
    if (ha && da != 1) bc.sa[d] = stride_a[d - (nd - a.size())];
    if (hb && db != 1) bc.sb[d] = stride_b[d - (nd - b.size())];
  }
  return bc;
}

// Visits every element of the broadcast result with flat offsets into both
// operands. Serial row-major order is normative.
template <class F>
void for_each_bcast(const Bcast& bc, F&& f) {
  const std::size_t nd = bc.out.size();
  const std::size_t total = numel(bc.out);
  std::vector<std::size_t> idx(nd, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    f(flat, oa, ob);
    for (std::size_t d = nd; d-- > 0;) {
      ++idx[d];
      oa += bc.sa[d];
      ob += bc.sb[d];
      if (idx[d] < bc.out[d]) break;
      oa -= bc.sa[d] * bc.out[d];
      ob -= bc.sb[d] * bc.out[d];
      idx[d] = 0;
    }
  }
}

using BinFwd = double (*)(double, double);
using BinGrad = double (*)(double, double);

Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, BinFwd f,
                 BinGrad dfa, BinGrad dfb) {
  const Bcast bc = broadcast_shapes(op, a->shape, b->shape);
  std::vector<double> out(numel(bc.out));
  for_each_bcast(bc, [&](std::size_t o, std::size_t oa, std::size_t ob) {
    out[o] = f(a->value[oa], b->value[ob]);
  });
  return make(op, bc.out, std::move(out), {a, b},
              [a, b, bc, dfa, dfb](Node& self) {
                const bool ga = a->requires_grad;
                const bool gb = b->requires_grad;
                if (ga) a->ensure_grad();
                if (gb) b->ensure_grad();
                for_each_bcast(bc, [&](std::size_t o, std::size_t oa, std::size_t ob) {
                  const double g = self.grad[o];
                  if (ga) a->grad[oa] += g * dfa(a->value[oa], b->value[ob]);
                  if (gb) b->grad[ob] += g * dfb(a->value[oa], b->value[ob]);
                });
              });
}

struct UnaryDef {
  double (*f)(double);
  double (*df)(double);  // derivative expressed in terms of the input
};

Tensor unary_op(const char* op, const Tensor& a, const UnaryDef& def) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = def.f(a->value[i]);
  auto df = def.df;
  return make(op, a->shape, std::move(out), {a}, [a, df](Node& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      a->grad[i] += self.grad[i] * df(a->value[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor constant(Shape shape, std::vector<double> value) {
  if (numel(shape) != value.size())
    throw param_error("constant: " + std::to_string(value.size()) +
                      " values for shape " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

Tensor constant_scalar(double v) { return constant({1}, {v}); }

Tensor param(Shape shape, std::vector<double> value) {
  Tensor t = constant(std::move(shape), std::move(value));
  t->requires_grad = true;
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * c;
  return make("scale", a->shape, std::move(out), {a}, [a, c](Node& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      a->grad[i] += self.grad[i] * c;
  });
}

Tensor add_const(const Tensor& a, double c) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + c;
  return make("add_const", a->shape, std::move(out), {a}, [a](Node& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      a->grad[i] += self.grad[i];
  });
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a,
                  {[](double x) { return std::exp(x); },
                   [](double x) { return std::exp(x); }});
}

Tensor log(const Tensor& a) {
  return unary_op("log", a,
                  {[](double x) { return std::log(x); },
                   [](double x) { return 1.0 / x; }});
}

Tensor softplus(const Tensor& a) {
  return unary_op("softplus", a,
                  {[](double x) {
                     return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
                   },
                   [](double x) { return stable_sigmoid(x); }});
}

Tensor gelu(const Tensor& a) {
  return unary_op(
      "gelu", a,
      {[](double x) {
         return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
       },
       [](double x) {
         const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
         const double pdf =
             std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
         return cdf + x * pdf;
       }});
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    shape_fail("matmul", a->shape, b->shape);
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  std::vector<double> out(m * n, 0.0);
  const double* av = a->value.data();
  const double* bv = b->value.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double x = av[i * k + l];
      const double* brow = bv + l * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  return make("matmul", {m, n}, std::move(out), {a, b}, [a, b, m, k, n](Node& self) {
    const double* g = self.grad.data();
    if (a->requires_grad) {
      a->ensure_grad();
      const double* bv = b->value.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          double acc = 0.0;
          const double* grow = g + i * n;
          const double* brow = bv + l * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          a->grad[i * k + l] += acc;
        }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      const double* av = a->value.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          const double x = av[i * k + l];
          const double* grow = g + i * n;
          double* brow = b->grad.data() + l * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += x * grow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a->shape.size() != 2) shape_fail("transpose", a->shape, {});
  const std::size_t m = a->shape[0], n = a->shape[1];
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a->value[i * n + j];
  return make("transpose", {n, m}, std::move(out), {a}, [a, m, n](Node& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        a->grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a->size()) shape_fail("reshape", a->shape, shape);
  return make("reshape", std::move(shape), a->value, {a}, [a](Node& self) {
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      a->grad[i] += self.grad[i];
  });
}

namespace {

// pre x axis x post decomposition of a row-major tensor
struct AxisSplit {
  std::size_t pre = 1, mid = 1, post = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (d < axis)
      s.pre *= shape[d];
    else if (d == axis)
      s.mid = shape[d];
    else
      s.post *= shape[d];
  }
  return s;
}

}  // namespace

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= a->shape.size() || start + len > a->shape[axis] || len == 0)
    throw param_error("slice: range [" + std::to_string(start) + ", " +
                      std::to_string(start + len) + ") invalid for axis " +
                      std::to_string(axis) + " of " + shape_str(a->shape));
  const AxisSplit s = split_axis(a->shape, axis);
  Shape oshape = a->shape;
  oshape[axis] = len;
  std::vector<double> out(numel(oshape));
  for (std::size_t p = 0; p < s.pre; ++p)
    for (std::size_t m = 0; m < len; ++m)
      std::copy_n(a->value.data() + (p * s.mid + start + m) * s.post, s.post,
                  out.data() + (p * len + m) * s.post);
  return make("slice", oshape, std::move(out), {a}, [a, s, start, len](Node& self) {
    a->ensure_grad();
    for (std::size_t p = 0; p < s.pre; ++p)
      for (std::size_t m = 0; m < len; ++m) {
        const double* g = self.grad.data() + (p * len + m) * s.post;
        double* dst = a->grad.data() + (p * s.mid + start + m) * s.post;
        for (std::size_t q = 0; q < s.post; ++q) dst[q] += g[q];
      }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw param_error("concat: no inputs");
  const Shape& base = parts[0]->shape;
  if (axis >= base.size()) throw param_error("concat: axis out of range");
  std::size_t total_mid = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != base.size()) shape_fail("concat", base, p->shape);
    for (std::size_t d = 0; d < base.size(); ++d)
      if (d != axis && p->shape[d] != base[d]) shape_fail("concat", base, p->shape);
    total_mid += p->shape[axis];
  }
  Shape oshape = base;
  oshape[axis] = total_mid;
  const AxisSplit s = split_axis(oshape, axis);
  std::vector<double> out(numel(oshape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t mid = p->shape[axis];
    for (std::size_t pr = 0; pr < s.pre; ++pr)
      for (std::size_t m = 0; m < mid; ++m)
        std::copy_n(p->value.data() + (pr * mid + m) * s.post, s.post,
                    out.data() + (pr * s.mid + offset + m) * s.post);
    offset += mid;
  }
  return make("concat", oshape, std::move(out), parts,
              [parts, s, axis](Node& self) {
                std::size_t offset = 0;
                for (const auto& p : parts) {
                  const std::size_t mid = p->shape[axis];
                  if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t pr = 0; pr < s.pre; ++pr)
                      for (std::size_t m = 0; m < mid; ++m) {
                        const double* g =
                            self.grad.data() + (pr * s.mid + offset + m) * s.post;
                        double* dst = p->grad.data() + (pr * mid + m) * s.post;
                        for (std::size_t q = 0; q < s.post; ++q) dst[q] += g[q];
                      }
                  }
                  offset += mid;
                }
              });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a->shape.size()) throw param_error("softmax: axis out of range");
  const AxisSplit s = split_axis(a->shape, axis);
  std::vector<double> out(a->size());
  for (std::size_t p = 0; p < s.pre; ++p)
    for (std::size_t q = 0; q < s.post; ++q) {
      double mx = -1e300;
      for (std::size_t m = 0; m < s.mid; ++m)
        mx = std::max(mx, a->value[(p * s.mid + m) * s.post + q]);
      double sum = 0.0;
      for (std::size_t m = 0; m < s.mid; ++m) {
        const std::size_t i = (p * s.mid + m) * s.post + q;
        out[i] = std::exp(a->value[i] - mx);
        sum += out[i];
      }
      for (std::size_t m = 0; m < s.mid; ++m) out[(p * s.mid + m) * s.post + q] /= sum;
    }
  return make("softmax", a->shape, std::move(out), {a}, [a, s](Node& self) {
    a->ensure_grad();
    for (std::size_t p = 0; p < s.pre; ++p)
      for (std::size_t q = 0; q < s.post; ++q) {
        double dot = 0.0;
        for (std::size_t m = 0; m < s.mid; ++m) {
          const std::size_t i = (p * s.mid + m) * s.post + q;
          dot += self.grad[i] * self.value[i];
        }
        for (std::size_t m = 0; m < s.mid; ++m) {
          const std::size_t i = (p * s.mid + m) * s.post + q;
          a->grad[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
  });
}

namespace {

// Shared lane-normalization backward: x-hat recomputed from saved stats.
struct NormStats {
  std::vector<double> mean, inv;  // one entry per lane
};

}  // namespace

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  if (a->shape.empty()) throw param_error("layer_norm: scalar input");
  const std::size_t d = a->shape.back();
  if (gain->shape != Shape{d} || bias->shape != Shape{d})
    shape_fail("layer_norm", a->shape, gain->shape);
  const std::size_t lanes = a->size() / d;
  auto stats = std::make_shared<NormStats>();
  stats->mean.resize(lanes);
  stats->inv.resize(lanes);
  std::vector<double> out(a->size());
  for (std::size_t l = 0; l < lanes; ++l) {
    const double* x = a->value.data() + l * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += x[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (x[i] - mu) * (x[i] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    stats->mean[l] = mu;
    stats->inv[l] = inv;
    for (std::size_t i = 0; i < d; ++i)
      out[l * d + i] = (x[i] - mu) * inv * gain->value[i] + bias->value[i];
  }
  return make("layer_norm", a->shape, std::move(out), {a, gain, bias},
              [a, gain, bias, stats, d, lanes](Node& self) {
                if (gain->requires_grad) gain->ensure_grad();
                if (bias->requires_grad) bias->ensure_grad();
                if (a->requires_grad) a->ensure_grad();
                for (std::size_t l = 0; l < lanes; ++l) {
                  const double* x = a->value.data() + l * d;
                  const double* g = self.grad.data() + l * d;
                  const double mu = stats->mean[l];
                  const double inv = stats->inv[l];
                  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                  for (std::size_t i = 0; i < d; ++i) {
                    const double xhat = (x[i] - mu) * inv;
                    const double dxhat = g[i] * gain->value[i];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    if (gain->requires_grad) gain->grad[i] += g[i] * xhat;
                    if (bias->requires_grad) bias->grad[i] += g[i];
                  }
                  if (a->requires_grad) {
                    const double nd = static_cast<double>(d);
                    for (std::size_t i = 0; i < d; ++i) {
                      const double xhat = (x[i] - mu) * inv;
                      const double dxhat = g[i] * gain->value[i];
                      a->grad[l * d + i] +=
                          inv * (dxhat - sum_dxhat / nd - xhat * sum_dxhat_xhat / nd);
                    }
                  }
                }
              });
}

Tensor group_norm(const Tensor& a, std::size_t groups, const Tensor& gain,
                  const Tensor& bias) {
  if (a->shape.size() != 3)
    throw param_error("group_norm: expected [N, C, L], got " + shape_str(a->shape));
  const std::size_t n = a->shape[0], c = a->shape[1], len = a->shape[2];
  if (groups == 0 || c % groups != 0)
    throw param_error("group_norm: " + std::to_string(groups) +
                      " groups do not divide " + std::to_string(c) + " channels");
  if (gain->shape != Shape{c} || bias->shape != Shape{c})
    shape_fail("group_norm", a->shape, gain->shape);
  const std::size_t cpg = c / groups;
  const std::size_t lane = cpg * len;
  const std::size_t lanes = n * groups;
  auto stats = std::make_shared<NormStats>();
  stats->mean.resize(lanes);
  stats->inv.resize(lanes);
  std::vector<double> out(a->size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t base = (b * c + g * cpg) * len;
      double mu = 0.0;
      for (std::size_t i = 0; i < lane; ++i) mu += a->value[base + i];
      mu /= static_cast<double>(lane);
      double var = 0.0;
      for (std::size_t i = 0; i < lane; ++i) {
        const double dv = a->value[base + i] - mu;
        var += dv * dv;
      }
      var /= static_cast<double>(lane);
      const double inv = 1.0 / std::sqrt(var + kGroupNormEps);
      stats->mean[b * groups + g] = mu;
      stats->inv[b * groups + g] = inv;
      for (std::size_t ci = 0; ci < cpg; ++ci)
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t idx = base + ci * len + i;
          out[idx] = (a->value[idx] - mu) * inv * gain->value[g * cpg + ci] +
                     bias->value[g * cpg + ci];
        }
    }
  return make(
      "group_norm", a->shape, std::move(out), {a, gain, bias},
      [a, gain, bias, stats, n, c, len, groups, cpg, lane](Node& self) {
        if (gain->requires_grad) gain->ensure_grad();
        if (bias->requires_grad) bias->ensure_grad();
        if (a->requires_grad) a->ensure_grad();
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t base = (b * c + g * cpg) * len;
            const double mu = stats->mean[b * groups + g];
            const double inv = stats->inv[b * groups + g];
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t ci = 0; ci < cpg; ++ci)
              for (std::size_t i = 0; i < len; ++i) {
                const std::size_t idx = base + ci * len + i;
                const double xhat = (a->value[idx] - mu) * inv;
                const double dxhat = self.grad[idx] * gain->value[g * cpg + ci];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                if (gain->requires_grad)
                  gain->grad[g * cpg + ci] += self.grad[idx] * xhat;
                if (bias->requires_grad) bias->grad[g * cpg + ci] += self.grad[idx];
              }
            if (a->requires_grad) {
              const double nl = static_cast<double>(lane);
              for (std::size_t ci = 0; ci < cpg; ++ci)
                for (std::size_t i = 0; i < len; ++i) {
                  const std::size_t idx = base + ci * len + i;
                  const double xhat = (a->value[idx] - mu) * inv;
                  const double dxhat = self.grad[idx] * gain->value[g * cpg + ci];
                  a->grad[idx] +=
                      inv * (dxhat - sum_dxhat / nl - xhat * sum_dxhat_xhat / nl);
                }
            }
          }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride, std::size_t pad) {
  if (x->shape.size() != 3 || w->shape.size() != 3 || x->shape[1] != w->shape[1])
    shape_fail("conv1d", x->shape, w->shape);
  if (stride == 0) throw param_error("conv1d: zero stride");
  const std::size_t n = x->shape[0], cin = x->shape[1], lin = x->shape[2];
  const std::size_t cout = w->shape[0], k = w->shape[2];
  if (b->shape != Shape{cout}) shape_fail("conv1d", w->shape, b->shape);
  if (lin + 2 * pad < k)
    throw param_error("conv1d: kernel " + std::to_string(k) +
                      " longer than padded input " + std::to_string(lin + 2 * pad));
  const std::size_t lout = (lin + 2 * pad - k) / stride + 1;
  std::vector<double> out(n * cout * lout);
  for (std::size_t bi = 0; bi < n; ++bi)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ol = 0; ol < lout; ++ol) {
        double acc = b->value[co];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* xrow = x->value.data() + (bi * cin + ci) * lin;
          const double* wrow = w->value.data() + (co * cin + ci) * k;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const std::ptrdiff_t il =
                static_cast<std::ptrdiff_t>(ol * stride + kk) -
                static_cast<std::ptrdiff_t>(pad);
            if (il >= 0 && il < static_cast<std::ptrdiff_t>(lin))
              acc += xrow[il] * wrow[kk];
          }
        }
        out[(bi * cout + co) * lout + ol] = acc;
      }
  return make(
      "conv1d", {n, cout, lout}, std::move(out), {x, w, b},
      [x, w, b, n, cin, lin, cout, k, lout, stride, pad](Node& self) {
        const bool gx = x->requires_grad, gw = w->requires_grad,
                   gb = b->requires_grad;
        if (gx) x->ensure_grad();
        if (gw) w->ensure_grad();
        if (gb) b->ensure_grad();
        for (std::size_t bi = 0; bi < n; ++bi)
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t ol = 0; ol < lout; ++ol) {
              const double g = self.grad[(bi * cout + co) * lout + ol];
              if (g == 0.0) continue;
              if (gb) b->grad[co] += g;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* xrow = x->value.data() + (bi * cin + ci) * lin;
                const double* wrow = w->value.data() + (co * cin + ci) * k;
                double* dxrow = gx ? x->grad.data() + (bi * cin + ci) * lin : nullptr;
                double* dwrow = gw ? w->grad.data() + (co * cin + ci) * k : nullptr;
                for (std::size_t kk = 0; kk < k; ++kk) {
                  const std::ptrdiff_t il =
                      static_cast<std::ptrdiff_t>(ol * stride + kk) -
                      static_cast<std::ptrdiff_t>(pad);
                  if (il < 0 || il >= static_cast<std::ptrdiff_t>(lin)) continue;
                  if (gw) dwrow[kk] += g * xrow[il];
                  if (gx) dxrow[il] += g * wrow[kk];
                }
              }
            }
      });
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a->value) acc += v;
  return make("sum", {1}, {acc}, {a}, [a](Node& self) {
    a->ensure_grad();
    const double g = self.grad[0];
    for (auto& v : a->grad) v += g;
  });
}

Tensor mean_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a->value) acc += v;
  const double n = static_cast<double>(a->size());
  return make("mean", {1}, {acc / n}, {a}, [a, n](Node& self) {
    a->ensure_grad();
    const double g = self.grad[0] / n;
    for (auto& v : a->grad) v += g;
  });
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  if (axis >= a->shape.size()) throw param_error("sum_axis: axis out of range");
  const AxisSplit s = split_axis(a->shape, axis);
  Shape oshape = a->shape;
  oshape[axis] = 1;
  std::vector<double> out(s.pre * s.post, 0.0);
  for (std::size_t p = 0; p < s.pre; ++p)
    for (std::size_t m = 0; m < s.mid; ++m)
      for (std::size_t q = 0; q < s.post; ++q)
        out[p * s.post + q] += a->value[(p * s.mid + m) * s.post + q];
  return make("sum_axis", oshape, std::move(out), {a}, [a, s](Node& self) {
    a->ensure_grad();
    for (std::size_t p = 0; p < s.pre; ++p)
      for (std::size_t m = 0; m < s.mid; ++m)
        for (std::size_t q = 0; q < s.post; ++q)
          a->grad[(p * s.mid + m) * s.post + q] += self.grad[p * s.post + q];
  });
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta,
                 const Tensor& mask) {
  if (pred->shape != target->shape)
    shape_fail("smooth_l1", pred->shape, target->shape);
  if (!(beta > 0.0)) throw param_error("smooth_l1: beta must be positive");

  auto rho = [beta](double e) {
    const double ae = std::abs(e);
    return ae < beta ? 0.5 * e * e : beta * (ae - 0.5 * beta);
  };
  auto drho = [beta](double e) {
    const double ae = std::abs(e);
    return ae < beta ? e : (e > 0.0 ? beta : -beta);
  };

  if (!mask) {
    const double n = static_cast<double>(pred->size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->size(); ++i)
      acc += rho(pred->value[i] - target->value[i]);
    return make("smooth_l1", {1}, {acc / n}, {pred, target},
                [pred, target, drho, n](Node& self) {
                  const double g = self.grad[0] / n;
                  const bool gp = pred->requires_grad, gt = target->requires_grad;
                  if (gp) pred->ensure_grad();
                  if (gt) target->ensure_grad();
                  for (std::size_t i = 0; i < pred->size(); ++i) {
                    const double d = drho(pred->value[i] - target->value[i]) * g;
                    if (gp) pred->grad[i] += d;
                    if (gt) target->grad[i] -= d;
                  }
                });
  }

  const Bcast bc = broadcast_shapes("smooth_l1", pred->shape, mask->shape);
  if (bc.out != pred->shape)
    throw param_error("smooth_l1: mask " + shape_str(mask->shape) +
                      " does not broadcast onto " + shape_str(pred->shape));
  double denom = 0.0, acc = 0.0;
  for_each_bcast(bc, [&](std::size_t o, std::size_t, std::size_t ob) {
    const double w = mask->value[ob];
    denom += w;
    acc += w * rho(pred->value[o] - target->value[o]);
  });
  if (denom <= 0.0) throw param_error("smooth_l1: mask selects nothing");
  return make("smooth_l1", {1}, {acc / denom}, {pred, target, mask},
              [pred, target, mask, bc, drho, denom](Node& self) {
                const double g = self.grad[0] / denom;
                const bool gp = pred->requires_grad, gt = target->requires_grad;
                if (gp) pred->ensure_grad();
                if (gt) target->ensure_grad();
                for_each_bcast(bc, [&](std::size_t o, std::size_t, std::size_t ob) {
                  const double w = mask->value[ob];
                  if (w == 0.0) return;
                  const double d = w * drho(pred->value[o] - target->value[o]) * g;
                  if (gp) pred->grad[o] += d;
                  if (gt) target->grad[o] -= d;
                });
              });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  if (logits->shape.size() != 2)
    throw param_error("cross_entropy: expected [B, K], got " +
                      shape_str(logits->shape));
  const std::size_t b = logits->shape[0], k = logits->shape[1];
  if (labels.size() != b)
    throw param_error("cross_entropy: " + std::to_string(labels.size()) +
                      " labels for batch " + std::to_string(b));
  auto probs = std::make_shared<std::vector<double>>(b * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= k)
      throw param_error("cross_entropy: label " + std::to_string(labels[i]) +
                        " out of range");
    const double* row = logits->value.data() + i * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      (*probs)[i * k + j] = std::exp(row[j] - mx);
      sum += (*probs)[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] /= sum;
    loss -= std::log((*probs)[i * k + labels[i]]);
  }
  loss /= static_cast<double>(b);
  return make("cross_entropy", {1}, {loss}, {logits},
              [logits, labels, probs, b, k](Node& self) {
                logits->ensure_grad();
                const double g = self.grad[0] / static_cast<double>(b);
                for (std::size_t i = 0; i < b; ++i)
                  for (std::size_t j = 0; j < k; ++j) {
                    const double onehot = (j == labels[i]) ? 1.0 : 0.0;
                    logits->grad[i * k + j] += g * ((*probs)[i * k + j] - onehot);
                  }
              });
}

void backward(const Tensor& loss) {
  if (!loss->is_scalar())
    throw param_error("backward: loss must be scalar, got " +
                      shape_str(loss->shape));
  if (!loss->requires_grad) return;  // nothing reachable to differentiate

  // iterative post-order DFS over the requires_grad subgraph
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next].get();
      ++next;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior grads are scratch, recomputed per pass; only leaves accumulate
  // across repeated backward calls.
  for (Node* node : order)
    if (node->backprop) node->grad.assign(node->value.size(), 0.0);

  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    node->ensure_grad();
    if (node->backprop) node->backprop(*node);
  }
}

void zero_grad(const Tensor& t) { t->grad.assign(t->value.size(), 0.0); }

}  // namespace dbrn::ag
