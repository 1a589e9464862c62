#include "gbda/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace gbda::ad {

void Node::accumulate(const Matrix& g)
{
    if (!requires_grad) {
        return;
    }
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

namespace {

using Backward = std::function<void(const Matrix&)>;

Var make(Matrix value, std::initializer_list<const Var*> inputs, Backward fn)
{
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    for (const Var* in : inputs) {
        if (in->requires_grad()) {
            node->requires_grad = true;
        }
    }
    if (node->requires_grad) {
        for (const Var* in : inputs) {
            node->parents.push_back(in->node());
        }
        node->backward = std::move(fn);
    }
    return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidInput(std::string(op) + ": shape mismatch");
    }
}

} // namespace

Var leaf(Matrix value, bool requires_grad)
{
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Var(std::move(node));
}

Var constant(Matrix value) { return leaf(std::move(value), false); }

void backward(const Var& root)
{
    if (root.rows() != 1 || root.cols() != 1) {
        throw InvalidInput("backward() needs a scalar root");
    }
    if (!root.requires_grad()) {
        return;
    }
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->accumulate(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && node->grad.size() != 0) {
            node->backward(node->grad);
        }
    }
}

Var matmul(const Var& a, const Var& b)
{
    if (a.cols() != b.rows()) {
        throw InvalidInput("matmul: inner dimensions differ");
    }
    auto pa = a.node();
    auto pb = b.node();
    return make(a.value() * b.value(), {&a, &b}, [pa, pb](const Matrix& g) {
        if (pa->requires_grad) pa->accumulate(g * pb->value.transpose());
        if (pb->requires_grad) pb->accumulate(pa->value.transpose() * g);
    });
}

Var matmul_transposed(const Var& a, const Var& b)
{
    if (a.cols() != b.cols()) {
        throw InvalidInput("matmul_transposed: column counts differ");
    }
    auto pa = a.node();
    auto pb = b.node();
    return make(a.value() * b.value().transpose(), {&a, &b}, [pa, pb](const Matrix& g) {
        if (pa->requires_grad) pa->accumulate(g * pb->value);
        if (pb->requires_grad) pb->accumulate(g.transpose() * pa->value);
    });
}

Var add(const Var& a, const Var& b)
{
    check_same_shape(a, b, "add");
    auto pa = a.node();
    auto pb = b.node();
    return make(a.value() + b.value(), {&a, &b}, [pa, pb](const Matrix& g) {
        pa->accumulate(g);
        pb->accumulate(g);
    });
}

Var sub(const Var& a, const Var& b)
{
    check_same_shape(a, b, "sub");
    auto pa = a.node();
    auto pb = b.node();
    return make(a.value() - b.value(), {&a, &b}, [pa, pb](const Matrix& g) {
        pa->accumulate(g);
        if (pb->requires_grad) pb->accumulate(-g);
    });
}

Var mul(const Var& a, const Var& b)
{
    check_same_shape(a, b, "mul");
    auto pa = a.node();
    auto pb = b.node();
    return make(a.value().cwiseProduct(b.value()), {&a, &b}, [pa, pb](const Matrix& g) {
        if (pa->requires_grad) pa->accumulate(g.cwiseProduct(pb->value));
        if (pb->requires_grad) pb->accumulate(g.cwiseProduct(pa->value));
    });
}

Var scale(const Var& a, double factor)
{
    auto pa = a.node();
    return make(a.value() * factor, {&a}, [pa, factor](const Matrix& g) { pa->accumulate(g * factor); });
}

Var add_scalar(const Var& a, double offset)
{
    auto pa = a.node();
    return make(a.value().array() + offset, {&a}, [pa](const Matrix& g) { pa->accumulate(g); });
}

Var add_row(const Var& a, const Var& row)
{
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw InvalidInput("add_row: row shape mismatch");
    }
    auto pa = a.node();
    auto pr = row.node();
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return make(std::move(out), {&a, &row}, [pa, pr](const Matrix& g) {
        pa->accumulate(g);
        if (pr->requires_grad) pr->accumulate(g.colwise().sum());
    });
}

Var tanh(const Var& a)
{
    Matrix out = a.value().array().tanh();
    auto pa = a.node();
    auto y = std::make_shared<Matrix>(out);
    return make(std::move(out), {&a}, [pa, y](const Matrix& g) {
        pa->accumulate((g.array() * (1.0 - y->array().square())).matrix());
    });
}

Var hinge(const Var& a)
{
    auto pa = a.node();
    return make(a.value().cwiseMax(0.0), {&a}, [pa](const Matrix& g) {
        pa->accumulate((pa->value.array() > 0.0).select(g, 0.0));
    });
}

Var softmax_rows(const Var& a)
{
    Matrix y = gbda::softmax_rows(a.value());
    auto pa = a.node();
    auto ys = std::make_shared<Matrix>(y);
    return make(std::move(y), {&a}, [pa, ys](const Matrix& g) {
        Vector inner = g.cwiseProduct(*ys).rowwise().sum();
        Matrix dx = g;
        dx.colwise() -= inner;
        pa->accumulate(dx.cwiseProduct(*ys));
    });
}

Var log_softmax_rows(const Var& a)
{
    const Matrix& x = a.value();
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double peak = x.row(i).maxCoeff();
        double lse = peak + std::log((x.row(i).array() - peak).exp().sum());
        y.row(i) = x.row(i).array() - lse;
    }
    auto pa = a.node();
    auto probs = std::make_shared<Matrix>(y.array().exp().matrix());
    return make(std::move(y), {&a}, [pa, probs](const Matrix& g) {
        Vector total = g.rowwise().sum();
        Matrix dx = g;
        dx.array() -= probs->array().colwise() * total.array();
        pa->accumulate(dx);
    });
}

Var normalize_rows(const Var& a)
{
    Vector norms = a.value().rowwise().norm();
    if ((norms.array() <= 0.0).any()) {
        throw InvalidInput("normalize_rows: zero row");
    }
    Matrix y = a.value().array().colwise() / norms.array();
    auto pa = a.node();
    auto ys = std::make_shared<Matrix>(y);
    return make(std::move(y), {&a}, [pa, ys, norms](const Matrix& g) {
        Vector inner = g.cwiseProduct(*ys).rowwise().sum();
        Matrix dx = g - (ys->array().colwise() * inner.array()).matrix();
        pa->accumulate(dx.array().colwise() / norms.array());
    });
}

Var row_max(const Var& a)
{
    const Matrix& x = a.value();
    Matrix y(x.rows(), 1);
    std::vector<Eigen::Index> where(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        y(i, 0) = x.row(i).maxCoeff(&where[static_cast<std::size_t>(i)]);
    }
    auto pa = a.node();
    return make(std::move(y), {&a}, [pa, where](const Matrix& g) {
        Matrix dx = Matrix::Zero(pa->value.rows(), pa->value.cols());
        for (std::size_t i = 0; i < where.size(); ++i) {
            dx(static_cast<Eigen::Index>(i), where[i]) = g(static_cast<Eigen::Index>(i), 0);
        }
        pa->accumulate(dx);
    });
}

Var sum(const Var& a)
{
    auto pa = a.node();
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make(std::move(out), {&a}, [pa](const Matrix& g) {
        pa->accumulate(Matrix::Constant(pa->value.rows(), pa->value.cols(), g(0, 0)));
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(const Var& a)
{
    auto pa = a.node();
    double n = static_cast<double>(a.rows());
    return make(a.value().colwise().mean(), {&a}, [pa, n](const Matrix& g) {
        pa->accumulate(g.replicate(pa->value.rows(), 1) / n);
    });
}

Var transpose(const Var& a)
{
    auto pa = a.node();
    return make(a.value().transpose(), {&a}, [pa](const Matrix& g) { pa->accumulate(g.transpose()); });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count)
{
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw InvalidInput("slice_rows: range outside matrix");
    }
    auto pa = a.node();
    return make(a.value().middleRows(start, count), {&a}, [pa, start, count](const Matrix& g) {
        Matrix dx = Matrix::Zero(pa->value.rows(), pa->value.cols());
        dx.middleRows(start, count) = g;
        pa->accumulate(dx);
    });
}

Var vstack(std::span<const Var> parts)
{
    if (parts.empty()) {
        throw InvalidInput("vstack: no inputs");
    }
    Eigen::Index rows = 0;
    Eigen::Index cols = parts.front().cols();
    for (const Var& p : parts) {
        if (p.cols() != cols) {
            throw InvalidInput("vstack: column counts differ");
        }
        rows += p.rows();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    auto node = std::make_shared<Node>();
    std::vector<std::shared_ptr<Node>> sources;
    for (const Var& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
        sources.push_back(p.node());
        node->requires_grad = node->requires_grad || p.requires_grad();
    }
    node->value = std::move(out);
    if (node->requires_grad) {
        node->parents = sources;
        node->backward = [sources](const Matrix& g) {
            Eigen::Index offset = 0;
            for (const auto& s : sources) {
                if (s->requires_grad) s->accumulate(g.middleRows(offset, s->value.rows()));
                offset += s->value.rows();
            }
        };
    }
    return Var(std::move(node));
}

Var pick(const Var& a, Eigen::Index row, Eigen::Index col)
{
    if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols()) {
        throw InvalidInput("pick: index outside matrix");
    }
    auto pa = a.node();
    Matrix out(1, 1);
    out(0, 0) = a.value()(row, col);
    return make(std::move(out), {&a}, [pa, row, col](const Matrix& g) {
        Matrix dx = Matrix::Zero(pa->value.rows(), pa->value.cols());
        dx(row, col) = g(0, 0);
        pa->accumulate(dx);
    });
}

Var gather_rows(const Var& table, std::span<const TokenId> ids)
{
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.rows()) {
            throw InvalidInput("gather_rows: id outside table");
        }
        out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    auto pt = table.node();
    std::vector<TokenId> rows(ids.begin(), ids.end());
    return make(std::move(out), {&table}, [pt, rows](const Matrix& g) {
        Matrix dx = Matrix::Zero(pt->value.rows(), pt->value.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            dx.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        pt->accumulate(dx);
    });
}

} // namespace gbda::ad
