#include "windguard/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numeric>
#include <string>

#include "windguard/error.hpp"
#include "windguard/kernels.hpp"

namespace windguard::ad {

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddRow: return "add_row";
    case Op::MulRow: return "mul_row";
    case Op::Scale: return "scale";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Elu: return "elu";
    case Op::Clamp: return "clamp";
    case Op::SliceCols: return "slice_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
  }
  return "?";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                          b.shape_string());
  }
}

void require_row_of(const Tensor& a, const Tensor& row, const char* what) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ValidationError(std::string(what) + ": expected 1×" + std::to_string(a.cols()) +
                          " row, got " + row.shape_string());
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  auto in = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

Tensor as_matrix(Tensor t) {
  if (t.rank() == 1) return Tensor({1, t.size()}, std::vector<double>(t.values().begin(), t.values().end()));
  if (t.rank() != 2) throw ValidationError("tape values must be rank 1 or 2, got " + t.shape_string());
  return t;
}

}  // namespace

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericalError(std::string("non-finite result from ") + op_name(node.op) + " " +
                         node.value.shape_string());
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::note_kink(double distance) {
  if (distance > 0.0) kink_margin_ = std::min(kink_margin_, distance);
}

void Tape::note_branch(unsigned side) {
  branches_ = (branches_ ^ side) * 0x100000001b3ull;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = as_matrix(std::move(value));
  return push(std::move(n));
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = as_matrix(std::move(value));
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.cols() != vb.rows()) {
    throw ValidationError("matmul: inner dimensions differ " + va.shape_string() + " · " +
                          vb.shape_string());
  }
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  n.value = Tensor::matrix(va.rows(), vb.cols());
  kernels::gemm_nn(va.values(), vb.values(), n.value.values(), va.rows(), va.cols(), vb.cols(),
                   false);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  n.value = va;
  auto o = n.value.values();
  auto y = vb.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  n.value = va;
  auto o = n.value.values();
  auto y = vb.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  n.value = va;
  auto o = n.value.values();
  auto y = vb.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
  return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
  const Tensor& va = value(a);
  const Tensor& vr = value(row);
  require_row_of(va, vr, "add_row");
  Node n;
  n.op = Op::AddRow;
  n.a = a.id;
  n.b = row.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[row.id].needs_grad;
  n.value = va;
  const std::size_t cols = va.cols();
  auto o = n.value.values();
  auto r = vr.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += r[i % cols];
  return push(std::move(n));
}

Var Tape::mul_row(Var a, Var row) {
  const Tensor& va = value(a);
  const Tensor& vr = value(row);
  require_row_of(va, vr, "mul_row");
  Node n;
  n.op = Op::MulRow;
  n.a = a.id;
  n.b = row.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[row.id].needs_grad;
  n.value = va;
  const std::size_t cols = va.cols();
  auto o = n.value.values();
  auto r = vr.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= r[i % cols];
  return push(std::move(n));
}

Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.p0 = factor;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = map(value(a), [factor](double x) { return factor * x; });
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.id;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = map(value(a), stable_sigmoid);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a.id;
  n.needs_grad = nodes_[a.id].needs_grad;
  n.value = map(value(a), [](double x) { return std::tanh(x); });
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.a = a.id;
  n.needs_grad = nodes_[a.id].needs_grad;
  for (double x : value(a).values()) {
    note_kink(std::abs(x));
    note_branch(x > 0.0);
  }
  n.value = map(value(a), [](double x) { return x > 0.0 ? x : 0.0; });
  return push(std::move(n));
}

Var Tape::elu(Var a, double alpha) {
  Node n;
  n.op = Op::Elu;
  n.a = a.id;
  n.p0 = alpha;
  n.needs_grad = nodes_[a.id].needs_grad;
  for (double x : value(a).values()) note_branch(x >= 0.0);
  n.value = map(value(a), [alpha](double x) { return x >= 0.0 ? x : alpha * std::expm1(x); });
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  if (!(lo < hi)) throw ValidationError("clamp: lo must be below hi");
  Node n;
  n.op = Op::Clamp;
  n.a = a.id;
  n.p0 = lo;
  n.p1 = hi;
  n.needs_grad = nodes_[a.id].needs_grad;
  for (double x : value(a).values()) {
    note_kink(std::min(std::abs(x - lo), std::abs(x - hi)));
    note_branch(x < lo ? 0u : x > hi ? 2u : 1u);
  }
  n.value = map(value(a), [lo, hi](double x) { return std::clamp(x, lo, hi); });
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& va = value(a);
  if (begin >= end || end > va.cols()) {
    throw ValidationError("slice_cols: bad range [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") of " + va.shape_string());
  }
  Node n;
  n.op = Op::SliceCols;
  n.a = a.id;
  n.i0 = begin;
  n.i1 = end;
  n.needs_grad = nodes_[a.id].needs_grad;
  const std::size_t rows = va.rows();
  const std::size_t width = end - begin;
  n.value = Tensor::matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) n.value(r, c) = va(r, begin + c);
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t width = 0;
  Node n;
  n.op = Op::ConcatCols;
  for (Var p : parts) {
    const Tensor& v = value(p);
    if (v.rows() != rows) throw ValidationError("concat_cols: row count mismatch");
    width += v.cols();
    n.parts.push_back(p.id);
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  n.value = Tensor::matrix(rows, width);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) n.value(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.needs_grad = nodes_[a.id].needs_grad;
  auto v = value(a).values();
  n.value = Tensor::scalar(std::accumulate(v.begin(), v.end(), 0.0));
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  Node n;
  n.op = Op::Mean;
  n.a = a.id;
  n.needs_grad = nodes_[a.id].needs_grad;
  auto v = value(a).values();
  if (v.empty()) throw ValidationError("mean of empty tensor");
  n.value = Tensor::scalar(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
  return push(std::move(n));
}

Var Tape::mse(Var pred, Var target) {
  const Var diff = sub(pred, target);
  return mean(mul(diff, diff));
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw ValidationError("backward: loss must be scalar, got " + value(loss).shape_string());
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id)[0] = 1.0;
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (!n.needs_grad || n.op == Op::Leaf || n.grad.empty()) continue;
    backward_node(n, n.grad);
  }
}

void Tape::backward_node(const Node& node, const Tensor& g) {
  auto gv = g.values();
  auto wants = [this](std::uint32_t id) { return nodes_[id].needs_grad; };

  switch (node.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const Tensor& a = nodes_[node.a].value;
      const Tensor& b = nodes_[node.b].value;
      const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
      if (wants(node.a)) kernels::gemm_nt(gv, b.values(), grad_slot(node.a).values(), m, n, k);
      if (wants(node.b)) kernels::gemm_tn(a.values(), gv, grad_slot(node.b).values(), m, k, n);
      return;
    }
    case Op::Add:
    case Op::Sub: {
      const double sign = node.op == Op::Sub ? -1.0 : 1.0;
      if (wants(node.a)) {
        auto ga = grad_slot(node.a).values();
        for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i];
      }
      if (wants(node.b)) {
        auto gb = grad_slot(node.b).values();
        for (std::size_t i = 0; i < gv.size(); ++i) gb[i] += sign * gv[i];
      }
      return;
    }
    case Op::Mul: {
      // node.a may equal node.b (x·x); both contributions accumulate.
      const auto av = nodes_[node.a].value.values();
      const auto bv = nodes_[node.b].value.values();
      if (wants(node.a)) {
        auto ga = grad_slot(node.a).values();
        for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i] * bv[i];
      }
      if (wants(node.b)) {
        auto gb = grad_slot(node.b).values();
        for (std::size_t i = 0; i < gv.size(); ++i) gb[i] += gv[i] * av[i];
      }
      return;
    }
    case Op::AddRow: {
      const std::size_t cols = g.cols();
      if (wants(node.a)) {
        auto ga = grad_slot(node.a).values();
        for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i];
      }
      if (wants(node.b)) {
        auto gr = grad_slot(node.b).values();
        for (std::size_t i = 0; i < gv.size(); ++i) gr[i % cols] += gv[i];
      }
      return;
    }
    case Op::MulRow: {
      const std::size_t cols = g.cols();
      const auto av = nodes_[node.a].value.values();
      const auto rv = nodes_[node.b].value.values();
      if (wants(node.a)) {
        auto ga = grad_slot(node.a).values();
        for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i] * rv[i % cols];
      }
      if (wants(node.b)) {
        auto gr = grad_slot(node.b).values();
        for (std::size_t i = 0; i < gv.size(); ++i) gr[i % cols] += gv[i] * av[i];
      }
      return;
    }
    case Op::Scale: {
      auto ga = grad_slot(node.a).values();
      for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += node.p0 * gv[i];
      return;
    }
    case Op::Sigmoid: {
      auto ga = grad_slot(node.a).values();
      auto y = node.value.values();
      for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case Op::Tanh: {
      auto ga = grad_slot(node.a).values();
      auto y = node.value.values();
      for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case Op::Relu: {
      auto ga = grad_slot(node.a).values();
      auto x = nodes_[node.a].value.values();
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (x[i] > 0.0) ga[i] += gv[i];
      return;
    }
    case Op::Elu: {
      auto ga = grad_slot(node.a).values();
      auto x = nodes_[node.a].value.values();
      auto y = node.value.values();
      for (std::size_t i = 0; i < gv.size(); ++i)
        ga[i] += x[i] >= 0.0 ? gv[i] : gv[i] * (y[i] + node.p0);
      return;
    }
    case Op::Clamp: {
      auto ga = grad_slot(node.a).values();
      auto x = nodes_[node.a].value.values();
      for (std::size_t i = 0; i < gv.size(); ++i)
        if (x[i] > node.p0 && x[i] < node.p1) ga[i] += gv[i];
      return;
    }
    case Op::SliceCols: {
      Tensor& ga = grad_slot(node.a);
      const std::size_t width = node.i1 - node.i0;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) ga(r, node.i0 + c) += g(r, c);
      return;
    }
    case Op::ConcatCols: {
      std::size_t offset = 0;
      for (std::uint32_t id : node.parts) {
        const std::size_t width = nodes_[id].value.cols();
        if (wants(id)) {
          Tensor& gp = grad_slot(id);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < width; ++c) gp(r, c) += g(r, offset + c);
        }
        offset += width;
      }
      return;
    }
    case Op::Sum:
    case Op::Mean: {
      auto ga = grad_slot(node.a).values();
      const double scale = node.op == Op::Mean ? 1.0 / static_cast<double>(ga.size()) : 1.0;
      for (double& v : ga) v += gv[0] * scale;
      return;
    }
  }
}

GradCheckResult grad_check(const LossBuilder& build, std::vector<Tensor>& params, Rng& rng,
                           std::size_t max_entries, double eps) {
  GradCheckResult result;
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].size(); ++i) entries.emplace_back(p, i);
  if (entries.empty()) return result;

  std::uint64_t base_branches = 0;
  auto evaluate = [&](bool want_grads, std::vector<Tensor>* grads, std::uint64_t* branches) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor& t : params) vars.push_back(tape.parameter(t));
    const Var loss = build(tape, vars);
    if (want_grads) {
      tape.backward(loss);
      for (Var v : vars) grads->push_back(tape.grad(v));
      result.kink_margin = tape.kink_margin();
    }
    if (branches) *branches = tape.branch_signature();
    return tape.value(loss).item();
  };

  std::vector<Tensor> analytic;
  const double base_loss = evaluate(true, &analytic, &base_branches);
  // Rough size of the cancellation error in (up - down) / 2h.
  auto roundoff = [&](double h) {
    return 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(base_loss), 1.0) / h;
  };

  rng.shuffle(std::span(entries));
  entries.resize(std::min(entries.size(), max_entries));
  for (auto [p, i] : entries) {
    const double saved = params[p][i];
    // Central difference, or nullopt when either side lands on another branch
    // of some ReLU/ELU/clamp than the unperturbed pass did.
    auto central = [&](double h) -> std::optional<double> {
      std::uint64_t up_branches = 0, down_branches = 0;
      params[p][i] = saved + h;
      const double up = evaluate(false, nullptr, &up_branches);
      params[p][i] = saved - h;
      const double down = evaluate(false, nullptr, &down_branches);
      if (up_branches != base_branches || down_branches != base_branches) return std::nullopt;
      return (up - down) / (2.0 * h);
    };
    // Ridders' extrapolation over shrinking steps; keeps the estimate with the
    // smallest error (extrapolation spread plus roundoff) and stops once the
    // diagonal starts to diverge. Kinks are kept out by shrinking the first
    // step until it stays on one piece.
    constexpr int kTable = 12;
    constexpr double kShrink = 1.6, kShrink2 = kShrink * kShrink;
    double h = eps;
    std::optional<double> first = central(h);
    while (!first && h > eps * 1e-6) {
      h /= kShrink2;
      first = central(h);
    }
    if (!first) {
      params[p][i] = saved;
      ++result.skipped;
      continue;
    }
    double table[kTable][kTable];
    double best_err = std::numeric_limits<double>::infinity();
    double fd = table[0][0] = *first;
    for (int col = 1; col < kTable; ++col) {
      h /= kShrink;
      const std::optional<double> next = central(h);
      if (!next) break;  // a kink exactly at zero distance; rare
      table[0][col] = *next;
      double fac = kShrink2;
      for (int row = 1; row <= col; ++row) {
        table[row][col] = (table[row - 1][col] * fac - table[row - 1][col - 1]) / (fac - 1.0);
        fac *= kShrink2;
        const double err = std::max(std::abs(table[row][col] - table[row - 1][col]),
                                    std::abs(table[row][col] - table[row - 1][col - 1])) +
                           roundoff(h);
        if (err <= best_err) {
          best_err = err;
          fd = table[row][col];
        }
      }
      if (std::abs(table[col][col] - table[col - 1][col - 1]) >= 2.0 * best_err) break;
    }
    params[p][i] = saved;
    const double a = analytic[p][i];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a - fd) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace windguard::ad
