#include "rul/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rul::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Var& x, std::size_t rank) {
  if (x.shape().size() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_str(x.shape()));
  }
}

std::size_t last_dim(const Var& x) {
  if (x.shape().empty()) throw std::invalid_argument("rank-0 tensor has no last axis");
  return x.shape().back();
}

// y = f(x) elementwise; dfdx(x, y) gives the local derivative.
template <class F, class D>
Var unary(const Var& x, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, dfdx](Node& self) {
    const Tensor& xv = px->value();
    const Tensor& yv = self.value();
    Tensor& gx = px->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

std::size_t window_out_len(std::size_t len, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0) throw std::invalid_argument("kernel and stride must be positive");
  if (len < kernel) {
    throw std::invalid_argument("sequence length " + std::to_string(len) +
                                " is shorter than kernel " + std::to_string(kernel));
  }
  return (len - kernel) / stride + 1;
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  y.add_(b.value());
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(), [pa, pb](Node& self) {
    if (pa->requires_grad) pa->grad_buffer().add_(self.grad);
    if (pb->requires_grad) pb->grad_buffer().add_(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(), [pa, pb](Node& self) {
    if (pa->requires_grad) pa->grad_buffer().add_(self.grad);
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(), [pa, pb](Node& self) {
    const Tensor& av = pa->value();
    const Tensor& bv = pb->value();
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape("div", a, b);
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= bv[i];
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(), [pa, pb](Node& self) {
    const Tensor& bv = pb->value();
    const Tensor& yv = self.value();
    if (pa->requires_grad) {
      Tensor& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / bv[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * yv[i] / bv[i];
    }
  });
}

Var scale(const Var& a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var silu(const Var& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Var exp(const Var& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var clamp_min(const Var& x, double floor) {
  return unary(
      x, [floor](double v) { return v > floor ? v : floor; },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank("linear weight", w, 2);
  const std::size_t n = w.dim(0);
  const std::size_t m = w.dim(1);
  if (last_dim(x) != n) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                                shape_str(w.shape()));
  }
  const bool has_bias = static_cast<bool>(b);
  if (has_bias && (b.shape().size() != 1 || b.dim(0) != m)) {
    throw std::invalid_argument("linear: bias shape " + shape_str(b.shape()));
  }
  const std::size_t rows = x.value().size() / n;
  Shape out_shape = x.shape();
  out_shape.back() = m;
  Tensor y(out_shape);
  CMatMap xm(x.value().ptr(), rows, n);
  CMatMap wm(w.value().ptr(), n, m);
  MatMap ym(y.ptr(), rows, m);
  ym.noalias() = xm * wm;
  if (has_bias) {
    Eigen::Map<const Eigen::RowVectorXd> bv(b.value().ptr(), m);
    ym.rowwise() += bv;
  }
  Node* px = x.node();
  Node* pw = w.node();
  Node* pb = has_bias ? b.node() : nullptr;
  const bool req = x.requires_grad() || w.requires_grad() || (pb && pb->requires_grad);
  return x.tape().record(std::move(y), req, [px, pw, pb, rows, n, m](Node& self) {
    CMatMap gy(self.grad.ptr(), rows, m);
    if (px->requires_grad) {
      MatMap gx(px->grad_buffer().ptr(), rows, n);
      gx.noalias() += gy * CMatMap(pw->value().ptr(), n, m).transpose();
    }
    if (pw->requires_grad) {
      MatMap gw(pw->grad_buffer().ptr(), n, m);
      gw.noalias() += CMatMap(px->value().ptr(), rows, n).transpose() * gy;
    }
    if (pb && pb->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> gb(pb->grad_buffer().ptr(), m);
      gb += gy.colwise().sum();
    }
  });
}

Var linear(const Var& x, const Var& w) { return linear(x, w, Var()); }

Var bmm(const Var& a, const Var& b) {
  require_rank("bmm", a, 3);
  require_rank("bmm", b, 3);
  const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != B || b.dim(1) != k) {
    throw std::invalid_argument("bmm: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor y({B, m, n});
  for (std::size_t i = 0; i < B; ++i) {
    MatMap(y.ptr() + i * m * n, m, n).noalias() =
        CMatMap(a.value().ptr() + i * m * k, m, k) * CMatMap(b.value().ptr() + i * k * n, k, n);
  }
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(),
                         [pa, pb, B, m, k, n](Node& self) {
                           for (std::size_t i = 0; i < B; ++i) {
                             CMatMap gy(self.grad.ptr() + i * m * n, m, n);
                             if (pa->requires_grad) {
                               MatMap(pa->grad_buffer().ptr() + i * m * k, m, k).noalias() +=
                                   gy * CMatMap(pb->value().ptr() + i * k * n, k, n).transpose();
                             }
                             if (pb->requires_grad) {
                               MatMap(pb->grad_buffer().ptr() + i * k * n, k, n).noalias() +=
                                   CMatMap(pa->value().ptr() + i * m * k, m, k).transpose() * gy;
                             }
                           }
                         });
}

Var bmm_nt(const Var& a, const Var& b) {
  require_rank("bmm_nt", a, 3);
  require_rank("bmm_nt", b, 3);
  const std::size_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
  if (b.dim(0) != B || b.dim(2) != k) {
    throw std::invalid_argument("bmm_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  }
  Tensor y({B, m, n});
  for (std::size_t i = 0; i < B; ++i) {
    MatMap(y.ptr() + i * m * n, m, n).noalias() =
        CMatMap(a.value().ptr() + i * m * k, m, k) *
        CMatMap(b.value().ptr() + i * n * k, n, k).transpose();
  }
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(),
                         [pa, pb, B, m, k, n](Node& self) {
                           for (std::size_t i = 0; i < B; ++i) {
                             CMatMap gy(self.grad.ptr() + i * m * n, m, n);
                             if (pa->requires_grad) {
                               MatMap(pa->grad_buffer().ptr() + i * m * k, m, k).noalias() +=
                                   gy * CMatMap(pb->value().ptr() + i * n * k, n, k);
                             }
                             if (pb->requires_grad) {
                               MatMap(pb->grad_buffer().ptr() + i * n * k, n, k).noalias() +=
                                   gy.transpose() * CMatMap(pa->value().ptr() + i * m * k, m, k);
                             }
                           }
                         });
}

Var softmax(const Var& x) {
  const std::size_t n = last_dim(x);
  const std::size_t rows = x.value().size() / n;
  Tensor y(x.shape());
  const double* xv = x.value().ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv + r * n;
    double* yr = y.ptr() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xr[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < n; ++j) yr[j] /= total;
  }
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, rows, n](Node& self) {
    Tensor& gx = px->grad_buffer();
    const Tensor& yv = self.value();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[r * n + j] * yv[r * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        gx[r * n + j] += yv[r * n + j] * (self.grad[r * n + j] - dot);
      }
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Var transpose12(const Var& x) {
  require_rank("transpose12", x, 3);
  const std::size_t B = x.dim(0), m = x.dim(1), n = x.dim(2);
  Tensor y({B, n, m});
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) y.at(b, j, i) = xv.at(b, i, j);
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, B, m, n](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx.at(b, i, j) += self.grad.at(b, j, i);
  });
}

Var slice_last(const Var& x, std::size_t start, std::size_t len) {
  const std::size_t n = last_dim(x);
  if (start + len > n) throw std::invalid_argument("slice_last: range exceeds axis length");
  const std::size_t rows = x.value().size() / n;
  Shape shape = x.shape();
  shape.back() = len;
  Tensor y(shape);
  const double* xv = x.value().ptr();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < len; ++j) y[r * len + j] = xv[r * n + start + j];
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, rows, n, start, len](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < len; ++j) gx[r * n + start + j] += self.grad[r * len + j];
  });
}

Var concat_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
  const std::size_t rows = parts[0].value().size() / last_dim(parts[0]);
  std::size_t total = 0;
  bool req = false;
  std::vector<Node*> nodes;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    Shape lead(p.shape().begin(), p.shape().end() - 1);
    Shape lead0(parts[0].shape().begin(), parts[0].shape().end() - 1);
    if (lead != lead0) throw std::invalid_argument("concat_last: leading dims differ");
    total += last_dim(p);
    widths.push_back(last_dim(p));
    nodes.push_back(p.node());
    req = req || p.requires_grad();
  }
  Shape shape = parts[0].shape();
  shape.back() = total;
  Tensor y(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* pv = parts[k].value().ptr();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < widths[k]; ++j) y[r * total + offset + j] = pv[r * widths[k] + j];
    offset += widths[k];
  }
  return parts[0].tape().record(std::move(y), req, [nodes, widths, rows, total](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k]->requires_grad) {
        Tensor& g = nodes[k]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[k]; ++j)
            g[r * widths[k] + j] += self.grad[r * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

Var time_step(const Var& x, std::size_t t) {
  require_rank("time_step", x, 3);
  const std::size_t B = x.dim(0), L = x.dim(1), d = x.dim(2);
  if (t >= L) throw std::invalid_argument("time_step: index out of range");
  Tensor y({B, d});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < d; ++j) y.at(b, j) = x.value().at(b, t, j);
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, B, d, t](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < d; ++j) gx.at(b, t, j) += self.grad.at(b, j);
  });
}

Var stack_steps(const std::vector<Var>& steps) {
  if (steps.empty()) throw std::invalid_argument("stack_steps: no inputs");
  const std::size_t B = steps[0].dim(0), d = steps[0].dim(1), L = steps.size();
  Tensor y({B, L, d});
  bool req = false;
  std::vector<Node*> nodes;
  for (std::size_t t = 0; t < L; ++t) {
    if (steps[t].shape() != steps[0].shape()) throw std::invalid_argument("stack_steps: shape mismatch");
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < d; ++j) y.at(b, t, j) = steps[t].value().at(b, j);
    nodes.push_back(steps[t].node());
    req = req || steps[t].requires_grad();
  }
  return steps[0].tape().record(std::move(y), req, [nodes, B, d](Node& self) {
    for (std::size_t t = 0; t < nodes.size(); ++t) {
      if (!nodes[t]->requires_grad) continue;
      Tensor& g = nodes[t]->grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < d; ++j) g.at(b, j) += self.grad.at(b, t, j);
    }
  });
}

Var take_stride_last(const Var& x, std::size_t start, std::size_t step) {
  const std::size_t n = last_dim(x);
  if (step == 0 || start >= n) throw std::invalid_argument("take_stride_last: bad start/step");
  const std::size_t len = (n - start + step - 1) / step;
  const std::size_t rows = x.value().size() / n;
  Shape shape = x.shape();
  shape.back() = len;
  Tensor y(shape);
  const double* xv = x.value().ptr();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < len; ++j) y[r * len + j] = xv[r * n + start + j * step];
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, rows, n, len, start, step](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < len; ++j) gx[r * n + start + j * step] += self.grad[r * len + j];
  });
}

Var interleave_last(const Var& even, const Var& odd) {
  const std::size_t ne = last_dim(even), no = last_dim(odd);
  if (ne != no && ne != no + 1) throw std::invalid_argument("interleave_last: incompatible lengths");
  const std::size_t rows = even.value().size() / ne;
  if (odd.value().size() / no != rows) throw std::invalid_argument("interleave_last: row mismatch");
  const std::size_t n = ne + no;
  Shape shape = even.shape();
  shape.back() = n;
  Tensor y(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ne; ++j) y[r * n + 2 * j] = even.value()[r * ne + j];
    for (std::size_t j = 0; j < no; ++j) y[r * n + 2 * j + 1] = odd.value()[r * no + j];
  }
  Node* pe = even.node();
  Node* po = odd.node();
  return even.tape().record(std::move(y), even.requires_grad() || odd.requires_grad(),
                            [pe, po, rows, ne, no, n](Node& self) {
                              if (pe->requires_grad) {
                                Tensor& g = pe->grad_buffer();
                                for (std::size_t r = 0; r < rows; ++r)
                                  for (std::size_t j = 0; j < ne; ++j) g[r * ne + j] += self.grad[r * n + 2 * j];
                              }
                              if (po->requires_grad) {
                                Tensor& g = po->grad_buffer();
                                for (std::size_t r = 0; r < rows; ++r)
                                  for (std::size_t j = 0; j < no; ++j)
                                    g[r * no + j] += self.grad[r * n + 2 * j + 1];
                              }
                            });
}

Var pad_replicate_last(const Var& x, std::size_t left, std::size_t right) {
  const std::size_t n = last_dim(x);
  const std::size_t rows = x.value().size() / n;
  const std::size_t out = n + left + right;
  Shape shape = x.shape();
  shape.back() = out;
  Tensor y(shape);
  auto src = [=](std::size_t j) { return j < left ? 0 : (j - left < n ? j - left : n - 1); };
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out; ++j) y[r * out + j] = x.value()[r * n + src(j)];
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, rows, n, out, src](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out; ++j) gx[r * n + src(j)] += self.grad[r * out + j];
  });
}

Var conv1d(const Var& x, const Var& w, const Var& b, std::size_t stride) {
  require_rank("conv1d input", x, 3);
  require_rank("conv1d weight", w, 3);
  const std::size_t B = x.dim(0), cin = x.dim(1), L = x.dim(2);
  const std::size_t cout = w.dim(0), K = w.dim(2);
  if (w.dim(1) != cin) throw std::invalid_argument("conv1d: channel mismatch");
  if (b.shape() != Shape{cout}) throw std::invalid_argument("conv1d: bias shape");
  const std::size_t lout = window_out_len(L, K, stride);
  const std::size_t ck = cin * K;

  // Unfolded input, one [cin*K, lout] block per batch item; reused in backward.
  Tensor cols({B, ck, lout});
  const Tensor& xv = x.value();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < lout; ++t) cols.at(bi, c * K + k, t) = xv.at(bi, c, t * stride + k);

  Tensor y({B, cout, lout});
  CMatMap wm(w.value().ptr(), cout, ck);
  Eigen::Map<const Eigen::VectorXd> bv(b.value().ptr(), cout);
  for (std::size_t bi = 0; bi < B; ++bi) {
    MatMap yb(y.ptr() + bi * cout * lout, cout, lout);
    yb.noalias() = wm * CMatMap(cols.ptr() + bi * ck * lout, ck, lout);
    yb.colwise() += bv;
  }
  Node* px = x.node();
  Node* pw = w.node();
  Node* pb = b.node();
  const bool req = x.requires_grad() || w.requires_grad() || b.requires_grad();
  return x.tape().record(
      std::move(y), req,
      [px, pw, pb, cols = std::move(cols), B, cin, L, cout, K, lout, ck, stride](Node& self) {
        CMatMap wm(pw->value().ptr(), cout, ck);
        RowMat gcols(ck, lout);
        for (std::size_t bi = 0; bi < B; ++bi) {
          CMatMap gy(self.grad.ptr() + bi * cout * lout, cout, lout);
          if (pw->requires_grad) {
            MatMap(pw->grad_buffer().ptr(), cout, ck).noalias() +=
                gy * CMatMap(cols.ptr() + bi * ck * lout, ck, lout).transpose();
          }
          if (pb->requires_grad) {
            Eigen::Map<Eigen::VectorXd>(pb->grad_buffer().ptr(), cout) += gy.rowwise().sum();
          }
          if (px->requires_grad) {
            gcols.noalias() = wm.transpose() * gy;
            Tensor& gx = px->grad_buffer();
            for (std::size_t c = 0; c < cin; ++c)
              for (std::size_t k = 0; k < K; ++k)
                for (std::size_t t = 0; t < lout; ++t)
                  gx[(bi * cin + c) * L + t * stride + k] += gcols(c * K + k, t);
          }
        }
      });
}

Var maxpool1d(const Var& x, std::size_t kernel, std::size_t stride) {
  require_rank("maxpool1d", x, 3);
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const std::size_t lout = window_out_len(L, kernel, stride);
  Tensor y({B, C, lout});
  std::vector<std::size_t> argmax(B * C * lout);
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < B * C; ++r) {
    for (std::size_t t = 0; t < lout; ++t) {
      std::size_t best = r * L + t * stride;
      for (std::size_t k = 1; k < kernel; ++k) {
        const std::size_t idx = r * L + t * stride + k;
        if (xv[idx] > xv[best]) best = idx;
      }
      y[r * lout + t] = xv[best];
      argmax[r * lout + t] = best;
    }
  }
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, argmax = std::move(argmax)](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += self.grad[i];
  });
}

Var dropout(const Var& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Tensor mask(x.shape());
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? inv : 0.0;
  return mul(x, x.tape().constant(std::move(mask)));
}

Var normalize_rows(const Var& x) {
  require_rank("normalize_rows", x, 2);
  const std::size_t B = x.dim(0), D = x.dim(1);
  Tensor y(x.shape());
  std::vector<double> norms(B);
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < D; ++j) s += x.value().at(b, j) * x.value().at(b, j);
    norms[b] = std::sqrt(s);
    if (norms[b] > 0.0)
      for (std::size_t j = 0; j < D; ++j) y.at(b, j) = x.value().at(b, j) / norms[b];
  }
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, norms = std::move(norms), B, D](Node& self) {
    Tensor& gx = px->grad_buffer();
    const Tensor& yv = self.value();
    for (std::size_t b = 0; b < B; ++b) {
      if (norms[b] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < D; ++j) dot += yv.at(b, j) * self.grad.at(b, j);
      for (std::size_t j = 0; j < D; ++j) gx.at(b, j) += (self.grad.at(b, j) - yv.at(b, j) * dot) / norms[b];
    }
  });
}

Var row_dot(const Var& a, const Var& b) {
  require_same_shape("row_dot", a, b);
  require_rank("row_dot", a, 2);
  const std::size_t B = a.dim(0), D = a.dim(1);
  Tensor y({B, 1});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < D; ++j) y[i] += a.value().at(i, j) * b.value().at(i, j);
  Node* pa = a.node();
  Node* pb = b.node();
  return a.tape().record(std::move(y), a.requires_grad() || b.requires_grad(), [pa, pb, B, D](Node& self) {
    for (std::size_t i = 0; i < B; ++i) {
      const double g = self.grad[i];
      for (std::size_t j = 0; j < D; ++j) {
        if (pa->requires_grad) pa->grad_buffer().at(i, j) += g * pb->value().at(i, j);
        if (pb->requires_grad) pb->grad_buffer().at(i, j) += g * pa->value().at(i, j);
      }
    }
  });
}

Var row_norm(const Var& x) {
  require_rank("row_norm", x, 2);
  const std::size_t B = x.dim(0), D = x.dim(1);
  Tensor y({B, 1});
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < D; ++j) s += x.value().at(i, j) * x.value().at(i, j);
    y[i] = std::sqrt(s);
  }
  Node* px = x.node();
  return x.tape().record(std::move(y), x.requires_grad(), [px, B, D](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t i = 0; i < B; ++i) {
      const double n = self.value()[i];
      if (n == 0.0) continue;
      for (std::size_t j = 0; j < D; ++j) gx.at(i, j) += self.grad[i] * px->value().at(i, j) / n;
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  Node* px = x.node();
  return x.tape().record(Tensor::scalar(s), x.requires_grad(), [px](Node& self) {
    Tensor& gx = px->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[0];
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

}  // namespace rul::nn
