#include "seqil/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "seqil/kernels.hpp"

namespace seqil {

std::string shape_str(const std::vector<long>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace seqil

namespace seqil::ad {

namespace {

// dst += s * src, elementwise over identical shapes.
void axpy(Tensor& dst, const Tensor& src, double s = 1.0) {
  const long n = dst.numel();
  for (long i = 0; i < n; ++i) dst.data[i] += s * src.data[i];
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Graph::Node& Graph::node(Ref r) {
  if (r < 0 || r >= static_cast<Ref>(nodes_.size())) fail("graph: node reference out of range");
  return nodes_[static_cast<size_t>(r)];
}

const Graph::Node& Graph::node(Ref r) const {
  if (r < 0 || r >= static_cast<Ref>(nodes_.size())) fail("graph: node reference out of range");
  return nodes_[static_cast<size_t>(r)];
}

void Graph::fail(const std::string& msg) const { throw std::invalid_argument(msg); }

Ref Graph::push(Tensor value, std::function<void(Graph&)> back) {
  Node n;
  n.grad = Tensor::zeros(value.shape);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size()) - 1;
}

void Graph::check_same_shape(const char* op, Ref a, Ref b) const {
  if (!node(a).value.same_shape(node(b).value))
    fail(std::string(op) + ": shape mismatch " + shape_str(node(a).value.shape) + " vs " +
         shape_str(node(b).value.shape));
}

Ref Graph::constant(Tensor v) { return push(std::move(v), nullptr); }

Ref Graph::param(Parameter& p) {
  if (!p.grad.same_shape(p.value))
    fail("param '" + p.name + "': gradient shape does not match value shape");
  Ref out = push(p.value, nullptr);
  node(out).sink = &p;
  return out;
}

Ref Graph::add(Ref a, Ref b) {
  check_same_shape("add", a, b);
  Tensor v = node(a).value;
  axpy(v, node(b).value);
  Ref r = push(std::move(v), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    axpy(g.node(a).grad, g.node(r).grad);
    axpy(g.node(b).grad, g.node(r).grad);
  };
  return r;
}

Ref Graph::add_rowvec(Ref m, Ref v) {
  const Tensor& mv = node(m).value;
  const Tensor& vv = node(v).value;
  if (mv.ndim() != 2 || vv.ndim() != 1 || vv.shape[0] != mv.cols())
    fail("add_rowvec: expected [n,c] and [c], got " + shape_str(mv.shape) + " and " +
         shape_str(vv.shape));
  Tensor out = mv;
  const long rows = mv.rows(), cols = mv.cols();
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) out.at(i, j) += vv.at(j);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, v, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    axpy(g.node(m).grad, go);
    Tensor& gv = g.node(v).grad;
    const long rows = go.rows(), cols = go.cols();
    for (long j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (long i = 0; i < rows; ++i) acc += go.at(i, j);
      gv.at(j) += acc;
    }
  };
  return r;
}

Ref Graph::sub(Ref a, Ref b) {
  check_same_shape("sub", a, b);
  Tensor v = node(a).value;
  axpy(v, node(b).value, -1.0);
  Ref r = push(std::move(v), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    axpy(g.node(a).grad, g.node(r).grad);
    axpy(g.node(b).grad, g.node(r).grad, -1.0);
  };
  return r;
}

Ref Graph::mul(Ref a, Ref b) {
  check_same_shape("mul", a, b);
  Tensor v = node(a).value;
  const Tensor& bv = node(b).value;
  for (long i = 0; i < v.numel(); ++i) v.data[i] *= bv.data[i];
  Ref r = push(std::move(v), nullptr);
  node(r).back = [a, b, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& av = g.node(a).value;
    const Tensor& bv2 = g.node(b).value;
    Tensor& ga = g.node(a).grad;
    Tensor& gb = g.node(b).grad;
    for (long i = 0; i < go.numel(); ++i) {
      ga.data[i] += go.data[i] * bv2.data[i];
      gb.data[i] += go.data[i] * av.data[i];
    }
  };
  return r;
}

Ref Graph::scale(Ref a, double s) {
  Tensor v = node(a).value;
  for (double& x : v.data) x *= s;
  Ref r = push(std::move(v), nullptr);
  node(r).back = [a, s, r](Graph& g) { axpy(g.node(a).grad, g.node(r).grad, s); };
  return r;
}

Ref Graph::matmul(Ref a, Ref b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows())
    fail("matmul: incompatible shapes " + shape_str(av.shape) + " x " + shape_str(bv.shape));
  const long n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out = Tensor::zeros({n, m});
  kernels::matmul(av.data.data(), bv.data.data(), out.data.data(), n, k, m);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [a, b, r, n, k, m](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor da = Tensor::zeros({n, k});
    kernels::matmul_nt(go.data.data(), g.node(b).value.data.data(), da.data.data(), n, m, k);
    axpy(g.node(a).grad, da);
    Tensor db = Tensor::zeros({k, m});
    kernels::matmul_tn(g.node(a).value.data.data(), go.data.data(), db.data.data(), n, k, m);
    axpy(g.node(b).grad, db);
  };
  return r;
}

Ref Graph::matmul_nt(Ref a, Ref b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.cols())
    fail("matmul_nt: incompatible shapes " + shape_str(av.shape) + " x " + shape_str(bv.shape) +
         "^T");
  const long n = av.rows(), k = av.cols(), m = bv.rows();
  Tensor out = Tensor::zeros({n, m});
  kernels::matmul_nt(av.data.data(), bv.data.data(), out.data.data(), n, k, m);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [a, b, r, n, k, m](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor da = Tensor::zeros({n, k});
    kernels::matmul(go.data.data(), g.node(b).value.data.data(), da.data.data(), n, m, k);
    axpy(g.node(a).grad, da);
    Tensor db = Tensor::zeros({m, k});
    kernels::matmul_tn(go.data.data(), g.node(a).value.data.data(), db.data.data(), n, m, k);
    axpy(g.node(b).grad, db);
  };
  return r;
}

Ref Graph::gather_rows(Ref m, std::vector<long> row_ids) {
  const Tensor& mv = node(m).value;
  if (mv.ndim() != 2) fail("gather_rows: expected 2-d input, got " + shape_str(mv.shape));
  const long rows = mv.rows(), cols = mv.cols();
  for (long id : row_ids)
    if (id < 0 || id >= rows)
      fail("gather_rows: row index " + std::to_string(id) + " out of range [0," +
           std::to_string(rows) + ")");
  const long t = static_cast<long>(row_ids.size());
  Tensor out = Tensor::zeros({t, cols});
  for (long i = 0; i < t; ++i)
    std::copy_n(mv.data.begin() + row_ids[static_cast<size_t>(i)] * cols, cols,
                out.data.begin() + i * cols);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, r, ids = std::move(row_ids), cols](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor& gm = g.node(m).grad;
    for (size_t i = 0; i < ids.size(); ++i)
      for (long j = 0; j < cols; ++j)
        gm.at(ids[i], j) += go.at(static_cast<long>(i), j);
  };
  return r;
}

Ref Graph::pick(Ref m, std::vector<long> col_ids) {
  const Tensor& mv = node(m).value;
  if (mv.ndim() != 2) fail("pick: expected 2-d input, got " + shape_str(mv.shape));
  const long rows = mv.rows(), cols = mv.cols();
  if (static_cast<long>(col_ids.size()) != rows)
    fail("pick: need one column index per row (" + std::to_string(rows) + "), got " +
         std::to_string(col_ids.size()));
  for (long id : col_ids)
    if (id < 0 || id >= cols)
      fail("pick: column index " + std::to_string(id) + " out of range [0," +
           std::to_string(cols) + ")");
  Tensor out = Tensor::zeros({rows});
  for (long i = 0; i < rows; ++i) out.at(i) = mv.at(i, col_ids[static_cast<size_t>(i)]);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, r, ids = std::move(col_ids)](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor& gm = g.node(m).grad;
    for (long i = 0; i < go.numel(); ++i) gm.at(i, ids[static_cast<size_t>(i)]) += go.at(i);
  };
  return r;
}

Ref Graph::slice(Ref v, long lo, long len) {
  const Tensor& vv = node(v).value;
  if (vv.ndim() != 1) fail("slice: expected 1-d input, got " + shape_str(vv.shape));
  if (lo < 0 || len < 0 || lo + len > vv.shape[0])
    fail("slice: range [" + std::to_string(lo) + "," + std::to_string(lo + len) +
         ") out of bounds for length " + std::to_string(vv.shape[0]));
  Tensor out = Tensor::zeros({len});
  std::copy_n(vv.data.begin() + lo, len, out.data.begin());
  Ref r = push(std::move(out), nullptr);
  node(r).back = [v, r, lo, len](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor& gv = g.node(v).grad;
    for (long i = 0; i < len; ++i) gv.at(lo + i) += go.at(i);
  };
  return r;
}

Ref Graph::concat(const std::vector<Ref>& parts) {
  if (parts.empty()) fail("concat: no inputs");
  long total = 0;
  for (Ref p : parts) {
    if (node(p).value.ndim() != 1)
      fail("concat: expected 1-d inputs, got " + shape_str(node(p).value.shape));
    total += node(p).value.numel();
  }
  Tensor out = Tensor::zeros({total});
  long off = 0;
  for (Ref p : parts) {
    const Tensor& pv = node(p).value;
    std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + off);
    off += pv.numel();
  }
  Ref r = push(std::move(out), nullptr);
  node(r).back = [ps = parts, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    long off2 = 0;
    for (Ref p : ps) {
      Tensor& gp = g.node(p).grad;
      for (long i = 0; i < gp.numel(); ++i) gp.at(i) += go.at(off2 + i);
      off2 += gp.numel();
    }
  };
  return r;
}

Ref Graph::reshape(Ref x, std::vector<long> new_shape) {
  const Tensor& xv = node(x).value;
  if (Tensor::count(new_shape) != xv.numel())
    fail("reshape: cannot view " + shape_str(xv.shape) + " as " + shape_str(new_shape));
  Tensor out;
  out.shape = std::move(new_shape);
  out.data = xv.data;
  Ref r = push(std::move(out), nullptr);
  node(r).back = [x, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor& gx = g.node(x).grad;
    for (long i = 0; i < go.numel(); ++i) gx.data[static_cast<size_t>(i)] += go.data[static_cast<size_t>(i)];
  };
  return r;
}

Ref Graph::rowsum(Ref m) {
  const Tensor& mv = node(m).value;
  if (mv.ndim() != 2) fail("rowsum: expected 2-d input, got " + shape_str(mv.shape));
  const long rows = mv.rows(), cols = mv.cols();
  Tensor out = Tensor::zeros({rows});
  for (long i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (long j = 0; j < cols; ++j) acc += mv.at(i, j);
    out.at(i) = acc;
  }
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, r, cols](Graph& g) {
    const Tensor& go = g.node(r).grad;
    Tensor& gm = g.node(m).grad;
    for (long i = 0; i < go.numel(); ++i)
      for (long j = 0; j < cols; ++j) gm.at(i, j) += go.at(i);
  };
  return r;
}

Ref Graph::sum(Ref x) {
  const Tensor& xv = node(x).value;
  double acc = 0.0;
  for (double v : xv.data) acc += v;
  Ref r = push(Tensor::scalar(acc), nullptr);
  node(r).back = [x, r](Graph& g) {
    const double go = g.node(r).grad.item();
    Tensor& gx = g.node(x).grad;
    for (double& v : gx.data) v += go;
  };
  return r;
}

Ref Graph::mean(Ref x) {
  const Tensor& xv = node(x).value;
  if (xv.numel() == 0) fail("mean: input has no elements");
  double acc = 0.0;
  for (double v : xv.data) acc += v;
  const double n = static_cast<double>(xv.numel());
  Ref r = push(Tensor::scalar(acc / n), nullptr);
  node(r).back = [x, r, n](Graph& g) {
    const double go = g.node(r).grad.item() / n;
    Tensor& gx = g.node(x).grad;
    for (double& v : gx.data) v += go;
  };
  return r;
}

Ref Graph::square(Ref x) {
  Tensor v = node(x).value;
  for (double& e : v.data) e *= e;
  Ref r = push(std::move(v), nullptr);
  node(r).back = [x, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& xv = g.node(x).value;
    Tensor& gx = g.node(x).grad;
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += 2.0 * xv.data[i] * go.data[i];
  };
  return r;
}

Ref Graph::relu(Ref x) {
  Tensor v = node(x).value;
  for (double& e : v.data) e = e > 0.0 ? e : 0.0;
  Ref r = push(std::move(v), nullptr);
  node(r).back = [x, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& xv = g.node(x).value;
    Tensor& gx = g.node(x).grad;
    for (long i = 0; i < go.numel(); ++i)
      if (xv.data[i] > 0.0) gx.data[i] += go.data[i];
  };
  return r;
}

Ref Graph::tanh_(Ref x) {
  Tensor v = node(x).value;
  for (double& e : v.data) e = std::tanh(e);
  Ref r = push(std::move(v), nullptr);
  node(r).back = [x, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& yv = g.node(r).value;
    Tensor& gx = g.node(x).grad;
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += (1.0 - yv.data[i] * yv.data[i]) * go.data[i];
  };
  return r;
}

Ref Graph::exp_(Ref x) {
  Tensor v = node(x).value;
  for (double& e : v.data) e = std::exp(e);
  Ref r = push(std::move(v), nullptr);
  node(r).back = [x, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& yv = g.node(r).value;
    Tensor& gx = g.node(x).grad;
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += yv.data[i] * go.data[i];
  };
  return r;
}

Ref Graph::softplus(Ref x) {
  Tensor v = node(x).value;
  for (double& e : v.data) e = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
  Ref r = push(std::move(v), nullptr);
  node(r).back = [x, r](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& xv = g.node(x).value;
    Tensor& gx = g.node(x).grad;
    for (long i = 0; i < go.numel(); ++i) gx.data[i] += sigmoid(xv.data[i]) * go.data[i];
  };
  return r;
}

Ref Graph::log_softmax_rows(Ref m) {
  const Tensor& mv = node(m).value;
  if (mv.ndim() != 2) fail("log_softmax_rows: expected 2-d input, got " + shape_str(mv.shape));
  if (mv.cols() == 0) fail("log_softmax_rows: empty rows");
  const long rows = mv.rows(), cols = mv.cols();
  Tensor out = Tensor::zeros({rows, cols});
  kernels::log_softmax_rows(mv.data.data(), out.data.data(), rows, cols);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, r, rows, cols](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& yv = g.node(r).value;
    Tensor& gm = g.node(m).grad;
    for (long i = 0; i < rows; ++i) {
      double gsum = 0.0;
      for (long j = 0; j < cols; ++j) gsum += go.at(i, j);
      for (long j = 0; j < cols; ++j)
        gm.at(i, j) += go.at(i, j) - std::exp(yv.at(i, j)) * gsum;
    }
  };
  return r;
}

Ref Graph::logsumexp_rows(Ref m) {
  const Tensor& mv = node(m).value;
  if (mv.ndim() != 2) fail("logsumexp_rows: expected 2-d input, got " + shape_str(mv.shape));
  if (mv.cols() == 0) fail("logsumexp_rows: empty rows");
  const long rows = mv.rows(), cols = mv.cols();
  Tensor out = Tensor::zeros({rows});
  kernels::logsumexp_rows(mv.data.data(), out.data.data(), rows, cols);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, r, rows, cols](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& yv = g.node(r).value;
    const Tensor& xv = g.node(m).value;
    Tensor& gm = g.node(m).grad;
    for (long i = 0; i < rows; ++i) {
      const double gi = go.at(i);
      if (gi == 0.0) continue;
      for (long j = 0; j < cols; ++j) gm.at(i, j) += std::exp(xv.at(i, j) - yv.at(i)) * gi;
    }
  };
  return r;
}

Ref Graph::softmax_rows(Ref m) {
  const Tensor& mv = node(m).value;
  if (mv.ndim() != 2) fail("softmax_rows: expected 2-d input, got " + shape_str(mv.shape));
  if (mv.cols() == 0) fail("softmax_rows: empty rows");
  const long rows = mv.rows(), cols = mv.cols();
  Tensor out = Tensor::zeros({rows, cols});
  kernels::softmax_rows(mv.data.data(), out.data.data(), rows, cols);
  Ref r = push(std::move(out), nullptr);
  node(r).back = [m, r, rows, cols](Graph& g) {
    const Tensor& go = g.node(r).grad;
    const Tensor& yv = g.node(r).value;
    Tensor& gm = g.node(m).grad;
    for (long i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (long j = 0; j < cols; ++j) dot += go.at(i, j) * yv.at(i, j);
      for (long j = 0; j < cols; ++j) gm.at(i, j) += yv.at(i, j) * (go.at(i, j) - dot);
    }
  };
  return r;
}

void Graph::backward(Ref loss) {
  if (differentiated_) fail("backward: graph has already been differentiated");
  Node& ln = node(loss);
  if (ln.value.numel() != 1)
    fail("backward: loss must be scalar, got shape " + shape_str(ln.value.shape));
  differentiated_ = true;
  ln.grad.data[0] = 1.0;
  for (long i = static_cast<long>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back) n.back(*this);
    if (n.sink) axpy(n.sink->grad, n.grad);
  }
}

}  // namespace seqil::ad
