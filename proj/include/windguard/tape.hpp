#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "windguard/rng.hpp"
#include "windguard/tensor.hpp"

// Reverse-mode differentiation over rank-2 tensors.
//
// A Tape is an append-only record of primitive ops; ops are appended in
// evaluation order, so the record is already topologically sorted and
// backward() is one reverse sweep. Every op checks its output for NaN/Inf.
namespace windguard::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  AddRow,
  MulRow,
  Scale,
  Sigmoid,
  Tanh,
  Relu,
  Elu,
  Clamp,
  SliceCols,
  ConcatCols,
  Sum,
  Mean,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient (data, fixed operators).
  Var constant(Tensor value);
  /// Leaf whose gradient is collected by backward().
  Var parameter(Tensor value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// a[r×n] + row[1×n] broadcast over rows.
  Var add_row(Var a, Var row);
  /// a[r×n] ∘ row[1×n] broadcast over rows.
  Var mul_row(Var a, Var row);
  Var scale(Var a, double factor);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var elu(Var a, double alpha = 1.0);
  /// Gradient 1 strictly inside (lo, hi), 0 elsewhere.
  Var clamp(Var a, double lo, double hi);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  Var concat_cols(std::span<const Var> parts);
  Var sum(Var a);
  Var mean(Var a);
  /// mean((pred − target)²)
  Var mse(Var pred, Var target);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient from the last backward(); zeros if v was not reached.
  Tensor grad(Var v) const;

  /// Reverse sweep from a 1×1 loss. Clears gradients of any earlier sweep.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id).op; }

  /// Smallest nonzero distance of any ReLU/clamp input to its kink.
  double kink_margin() const { return kink_margin_; }
  /// Hash of which side of its kink every ReLU/ELU/clamp input fell on.
  /// Two evaluations with equal signatures lie in the same smooth piece.
  std::uint64_t branch_signature() const { return branches_; }

 private:
  struct Node {
    Op op = Op::Leaf;
    bool needs_grad = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double p0 = 0.0;
    double p1 = 0.0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    std::vector<std::uint32_t> parts;
    Tensor value;
    Tensor grad;
  };

  Var push(Node node);
  Tensor& grad_slot(std::uint32_t id);
  void note_kink(double distance);
  void note_branch(unsigned side);
  void backward_node(const Node& node, const Tensor& g);

  std::vector<Node> nodes_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
  std::uint64_t branches_ = 0xcbf29ce484222325ull;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Entries sitting so close to a kink that no clean step was found.
  std::size_t skipped = 0;
  double kink_margin = std::numeric_limits<double>::infinity();
};

/// Builds a scalar loss on a fresh tape from the given parameter handles.
using LossBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares backward() against central differences (Ridders' extrapolation
/// starting from step `eps`) on up to max_entries randomly chosen parameter entries.
/// Steps that move any ReLU/ELU/clamp input across its kink are shrunk first,
/// so the differences only ever see one smooth piece of the loss. Relative error per entry is
/// |analytic − fd| / max(|analytic|, |fd|, 1e-8).
GradCheckResult grad_check(const LossBuilder& build, std::vector<Tensor>& params, Rng& rng,
                           std::size_t max_entries, double eps = 1e-3);

}  // namespace windguard::ad
