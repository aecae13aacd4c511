#include "rmp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace rmp {

namespace detail {
void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value in output");
}
}  // namespace detail

using detail::check_finite;

bool Tensor::all_finite() const {
  for (scalar v : data_)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

const Tensor& Value::val() const { return tape->value(*this); }
const Shape& Value::shape() const { return tape->value(*this).shape(); }

int Tape::push_node(Tensor val, bool needs_grad) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::leaf(Tensor t, bool requires_grad) {
  check_finite(t, "leaf");
  return Value{this, push_node(std::move(t), requires_grad)};
}

Value Tape::param(const std::string& name, const Tensor& t) {
  RMP_CHECK(!param_ids_.count(name), "Tape::param: duplicate parameter name " + name);
  check_finite(t, "param");
  const int id = push_node(t, true);
  param_ids_[name] = id;
  param_order_.push_back(name);
  return Value{this, id};
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor(n.val.shape());
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  RMP_CHECK(buf.shape() == g.shape(), "gradient shape mismatch");
  scalar* dst = buf.data();
  const scalar* src = g.data();
  const std::int64_t n = g.numel();
  for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

const Tensor& Tape::grad(Value v) const {
  const Node& n = nodes_[v.id];
  RMP_CHECK(n.grad_ready, "Tape::grad: no gradient recorded for this value");
  return n.grad;
}

const Tensor& Tape::param_grad(const std::string& name) const {
  auto it = param_ids_.find(name);
  RMP_CHECK(it != param_ids_.end(), "Tape::param_grad: unknown parameter " + name);
  return grad(Value{const_cast<Tape*>(this), it->second});
}

std::vector<std::pair<std::string, Tensor>> Tape::param_grads() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(param_order_.size());
  for (const auto& name : param_order_) {
    const Node& n = nodes_[param_ids_.at(name)];
    out.emplace_back(name, n.grad_ready ? n.grad : Tensor(n.val.shape()));
  }
  return out;
}

void Tape::backward(Value loss) {
  RMP_CHECK(loss.tape == this, "Tape::backward: value from another tape");
  if (backward_done_) throw ContractError("Tape::backward: called twice without re-recording");
  backward_done_ = true;
  RMP_CHECK(nodes_[loss.id].val.numel() == 1, "Tape::backward: loss must be scalar");
  grad_buf(loss.id)[0] = scalar(1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && n.grad_ready) n.back(*this);
  }
}

// --- pointwise and shape ops -------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Value unary_pointwise(Value x, const char* name, Fwd fwd, Bwd dfdx) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  const std::int64_t n = xv.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
  check_finite(out, name);
  const bool ng = t.needs_grad(x.id);
  const int xid = x.id;
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [xid, id, dfdx](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      const Tensor& xval = tp.node_val(xid);
      const Tensor& oval = tp.node_val(id);
      Tensor& gx = tp.grad_buf(xid);
      const std::int64_t m = g.numel();
      for (std::int64_t i = 0; i < m; ++i) gx[i] += g[i] * dfdx(xval[i], oval[i]);
    });
  }
  return Value{&t, id};
}

}  // namespace

Value sigmoid(Value x) {
  return unary_pointwise(
      x, "sigmoid", [](scalar v) { return scalar(1) / (scalar(1) + std::exp(-v)); },
      [](scalar, scalar o) { return o * (scalar(1) - o); });
}

Value tanh_act(Value x) {
  return unary_pointwise(
      x, "tanh", [](scalar v) { return std::tanh(v); },
      [](scalar, scalar o) { return scalar(1) - o * o; });
}

Value relu(Value x) {
  return unary_pointwise(
      x, "relu", [](scalar v) { return v > scalar(0) ? v : scalar(0); },
      [](scalar v, scalar) { return v > scalar(0) ? scalar(1) : scalar(0); });
}

Value add(Value a, Value b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  RMP_CHECK(av.shape() == bv.shape(),
            "add: shape mismatch " + av.shape().str() + " vs " + bv.shape().str());
  Tensor out(av.shape());
  const std::int64_t n = av.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
  check_finite(out, "add");
  const bool nga = t.needs_grad(a.id), ngb = t.needs_grad(b.id);
  const int aid = a.id, bid = b.id;
  const int id = t.push_node(std::move(out), nga || ngb);
  if (nga || ngb) {
    t.set_backward(id, [aid, bid, nga, ngb, id](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      if (nga) tp.accumulate(aid, g);
      if (ngb) tp.accumulate(bid, g);
    });
  }
  return Value{&t, id};
}

Value hadamard(Value a, Value b) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  RMP_CHECK(av.shape() == bv.shape(),
            "hadamard: shape mismatch " + av.shape().str() + " vs " + bv.shape().str());
  Tensor out(av.shape());
  const std::int64_t n = av.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
  check_finite(out, "hadamard");
  const bool nga = t.needs_grad(a.id), ngb = t.needs_grad(b.id);
  const int aid = a.id, bid = b.id;
  const int id = t.push_node(std::move(out), nga || ngb);
  if (nga || ngb) {
    t.set_backward(id, [aid, bid, nga, ngb, id](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      const Tensor& av2 = tp.node_val(aid);
      const Tensor& bv2 = tp.node_val(bid);
      const std::int64_t m = g.numel();
      if (nga) {
        Tensor& ga = tp.grad_buf(aid);
        for (std::int64_t i = 0; i < m; ++i) ga[i] += g[i] * bv2[i];
      }
      if (ngb) {
        Tensor& gb = tp.grad_buf(bid);
        for (std::int64_t i = 0; i < m; ++i) gb[i] += g[i] * av2[i];
      }
    });
  }
  return Value{&t, id};
}

Value concat_channels(const std::vector<Value>& xs) {
  RMP_CHECK(!xs.empty(), "concat_channels: empty input list");
  Tape& t = *xs[0].tape;
  const Shape& s0 = t.value(xs[0]).shape();
  RMP_CHECK(s0.ndim() == 3, "concat_channels: expects HxWxC tensors");
  const int h = s0[0], w = s0[1];
  int ctot = 0;
  bool ng = false;
  for (const Value& v : xs) {
    const Shape& s = t.value(v).shape();
    RMP_CHECK(s.ndim() == 3 && s[0] == h && s[1] == w,
              "concat_channels: H,W mismatch " + s.str() + " vs " + s0.str());
    ctot += s[2];
    ng = ng || t.needs_grad(v.id);
  }
  Tensor out(Shape{h, w, ctot});
  {
    int coff = 0;
    for (const Value& v : xs) {
      const Tensor& xv = t.value(v);
      const int c = xv.shape()[2];
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int ci = 0; ci < c; ++ci) out.at(y, x, coff + ci) = xv.at(y, x, ci);
      coff += c;
    }
  }
  std::vector<int> ids, chans;
  for (const Value& v : xs) {
    ids.push_back(v.id);
    chans.push_back(t.value(v).shape()[2]);
  }
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [ids, chans, h, w, id](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      int coff = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const int c = chans[k];
        if (tp.needs_grad(ids[k])) {
          Tensor& gx = tp.grad_buf(ids[k]);
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              for (int ci = 0; ci < c; ++ci) gx.at(y, x, ci) += g.at(y, x, coff + ci);
        }
        coff += c;
      }
    });
  }
  return Value{&t, id};
}

Value sum_all(Value x) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  double acc = 0;
  const std::int64_t n = xv.numel();
  for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(xv[i]);
  Tensor out(Shape{1});
  out[0] = static_cast<scalar>(acc);
  check_finite(out, "sum");
  const bool ng = t.needs_grad(x.id);
  const int xid = x.id;
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [xid, id](Tape& tp) {
      const scalar g = tp.node_grad(id)[0];
      Tensor& gx = tp.grad_buf(xid);
      const std::int64_t m = gx.numel();
      for (std::int64_t i = 0; i < m; ++i) gx[i] += g;
    });
  }
  return Value{&t, id};
}

Value scale(Value x, double c) {
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  const std::int64_t n = xv.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = static_cast<scalar>(c) * xv[i];
  check_finite(out, "scale");
  const bool ng = t.needs_grad(x.id);
  const int xid = x.id;
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [xid, id, c](Tape& tp) {
      const Tensor& g = tp.node_grad(id);
      Tensor& gx = tp.grad_buf(xid);
      const std::int64_t m = g.numel();
      for (std::int64_t i = 0; i < m; ++i) gx[i] += static_cast<scalar>(c) * g[i];
    });
  }
  return Value{&t, id};
}

Tensor softmax_rows(const Tensor& logits) {
  RMP_CHECK(logits.shape().ndim() == 3, "softmax_rows: expects HxWxQ");
  const int h = logits.shape()[0], w = logits.shape()[1], q = logits.shape()[2];
  Tensor probs(logits.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      scalar mx = logits.at(y, x, 0);
      for (int k = 1; k < q; ++k) mx = std::max(mx, logits.at(y, x, k));
      double denom = 0;
      for (int k = 0; k < q; ++k) denom += std::exp(static_cast<double>(logits.at(y, x, k) - mx));
      for (int k = 0; k < q; ++k)
        probs.at(y, x, k) =
            static_cast<scalar>(std::exp(static_cast<double>(logits.at(y, x, k) - mx)) / denom);
    }
  }
  return probs;
}

Value weighted_softmax_ce(Value logits, const std::vector<int>& labels,
                          const std::vector<double>& class_weights) {
  Tape& t = *logits.tape;
  const Tensor& lv = t.value(logits);
  RMP_CHECK(lv.shape().ndim() == 3, "weighted_softmax_ce: logits must be HxWxQ");
  const int h = lv.shape()[0], w = lv.shape()[1], q = lv.shape()[2];
  RMP_CHECK(static_cast<int>(labels.size()) == h * w,
            "weighted_softmax_ce: labels length must equal H*W");
  RMP_CHECK(static_cast<int>(class_weights.size()) == q,
            "weighted_softmax_ce: weights length must equal Q");
  for (double cw : class_weights)
    RMP_CHECK(cw > 0.0, "weighted_softmax_ce: class weights must be positive");
  for (int lbl : labels)
    if (lbl < 0 || lbl >= q)
      throw ContractError("weighted_softmax_ce: label " + std::to_string(lbl) +
                          " out of range [0," + std::to_string(q) + ")");

  Tensor probs = softmax_rows(lv);
  const double npix = static_cast<double>(h) * w;
  double loss = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int lbl = labels[y * w + x];
      const double p = std::max(static_cast<double>(probs.at(y, x, lbl)), 1e-300);
      loss += class_weights[lbl] * (-std::log(p));
    }
  }
  Tensor out(Shape{1});
  out[0] = static_cast<scalar>(loss / npix);
  check_finite(out, "weighted_softmax_ce");

  const bool ng = t.needs_grad(logits.id);
  const int lid = logits.id;
  const int id = t.push_node(std::move(out), ng);
  if (ng) {
    t.set_backward(id, [lid, id, probs, labels, class_weights, h, w, q, npix](Tape& tp) {
      const scalar g = tp.node_grad(id)[0];
      Tensor& gl = tp.grad_buf(lid);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int lbl = labels[y * w + x];
          const scalar wl = static_cast<scalar>(class_weights[lbl] / npix) * g;
          for (int k = 0; k < q; ++k) {
            const scalar delta = (k == lbl) ? scalar(1) : scalar(0);
            gl.at(y, x, k) += wl * (probs.at(y, x, k) - delta);
          }
        }
      }
    });
  }
  return Value{&t, id};
}

}  // namespace rmp
