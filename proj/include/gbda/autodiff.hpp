#pragma once

// Small reverse-mode automatic differentiation over dense matrices.
//
// Every operation records a node holding its value and a closure that pushes
// the incoming gradient to its parents. Nodes whose inputs never require a
// gradient drop their closure, so shared read-only parameters can be used from
// several threads as long as nobody requests gradients for them.

#include "gbda/core.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace gbda::ad {

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Matrix&)> backward;

    void accumulate(const Matrix& g);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Matrix& value() const { return node_->value; }
    /// Zero-shaped until backward() reaches this node.
    const Matrix& grad() const { return node_->grad; }
    Matrix& mutable_value() { return node_->value; }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    void zero_grad() { node_->grad.resize(0, 0); }

    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }
    bool valid() const { return static_cast<bool>(node_); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

Var leaf(Matrix value, bool requires_grad);
Var constant(Matrix value);

/// Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_transposed(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
/// Adds a 1 x m row to every row of a.
Var add_row(const Var& a, const Var& row);
Var tanh(const Var& a);
Var hinge(const Var& a);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// Each row divided by its L2 norm.
Var normalize_rows(const Var& a);
/// n x 1 column of per-row maxima; gradient flows to the first argmax.
Var row_max(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// 1 x m column means.
Var mean_rows(const Var& a);
Var transpose(const Var& a);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var vstack(std::span<const Var> parts);
Var pick(const Var& a, Eigen::Index row, Eigen::Index col);
Var gather_rows(const Var& table, std::span<const TokenId> ids);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

} // namespace gbda::ad
