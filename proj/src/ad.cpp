#include "espvfm/ad.hpp"

#include <cmath>
#include <string>

namespace espvfm::ad {

namespace {

Array softplus_array(const Array& x) {
    return x.max(0.0) + (-x.abs()).exp().log1p();
}

Array sigmoid_array(const Array& x) { return 1.0 / (1.0 + (-x).exp()); }

std::string shape(const Array& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

bool is_scalar(const Array& a) { return a.rows() == 1 && a.cols() == 1; }

/// Reduces a broadcast gradient back onto an operand's shape.
Array reduce_to(const Array& g, const Array& like) {
    if (is_scalar(like) && !is_scalar(g)) return Array::Constant(1, 1, g.sum());
    return g;
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double softplus_inverse(double y) {
    if (!(y > 0)) throw ValidationError("softplus inverse needs a positive value");
    return y > 30 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

const Array& Var::value() const { return tape_->value(id_); }
const Array& Var::grad() const { return tape_->grad(id_); }
double Var::scalar() const {
    const Array& v = value();
    if (!is_scalar(v)) throw ValidationError("scalar() on a " + shape(v) + " node");
    return v(0, 0);
}

const Array& Tape::grad(int id) const {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) {
        const_cast<Array&>(zero_) = Array::Zero(n.value.rows(), n.value.cols());
        return zero_;
    }
    return n.grad;
}

void Tape::check(Var v) const {
    if (v.tape() != this || v.id() < 0 || v.id() >= static_cast<int>(nodes_.size()))
        throw ValidationError("variable does not belong to this tape");
}

Tape::Node& Tape::node(Var v) {
    check(v);
    return nodes_[v.id()];
}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Array value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Var Tape::scalar(double v, bool requires_grad) {
    return leaf(Array::Constant(1, 1, v), requires_grad);
}

template <class F>
Var Tape::elementwise(Op op, Var a, Var b, F&& f) {
    const Node& na = node(a);
    const Node& nb = node(b);
    Node n;
    if (na.value.rows() == nb.value.rows() && na.value.cols() == nb.value.cols()) {
        n.value = f(na.value, nb.value);
    } else if (is_scalar(na.value)) {
        n.value = f(Array::Constant(nb.value.rows(), nb.value.cols(), na.value(0, 0)), nb.value);
    } else if (is_scalar(nb.value)) {
        n.value = f(na.value, Array::Constant(na.value.rows(), na.value.cols(), nb.value(0, 0)));
    } else {
        throw ValidationError("shape mismatch " + shape(na.value) + " vs " + shape(nb.value));
    }
    n.op = op;
    n.a = a.id();
    n.b = b.id();
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    return elementwise(Op::Add, a, b, [](const Array& x, const Array& y) { return Array(x + y); });
}
Var Tape::sub(Var a, Var b) {
    return elementwise(Op::Sub, a, b, [](const Array& x, const Array& y) { return Array(x - y); });
}
Var Tape::mul(Var a, Var b) {
    return elementwise(Op::Mul, a, b, [](const Array& x, const Array& y) { return Array(x * y); });
}
Var Tape::div(Var a, Var b) {
    return elementwise(Op::Div, a, b, [](const Array& x, const Array& y) { return Array(x / y); });
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::scale(Var a, double c) {
    const Node& na = node(a);
    Node n;
    n.value = c * na.value;
    n.op = Op::Scale;
    n.a = a.id();
    n.c = c;
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::shift(Var a, double c) {
    const Node& na = node(a);
    Node n;
    n.value = na.value + c;
    n.op = Op::Shift;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.value.cols() != nb.value.rows())
        throw ValidationError("matmul shape mismatch " + shape(na.value) + " * " + shape(nb.value));
    Node n;
    n.value = (na.value.matrix() * nb.value.matrix()).array();
    n.op = Op::MatMul;
    n.a = a.id();
    n.b = b.id();
    n.requires_grad = na.requires_grad || nb.requires_grad;
    return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
    const Node& na = node(a);
    const Node& nr = node(row);
    if (nr.value.rows() != 1 || nr.value.cols() != na.value.cols())
        throw ValidationError("add_row expects a 1x" + std::to_string(na.value.cols()) +
                              " row, got " + shape(nr.value));
    Node n;
    n.value = na.value.rowwise() + nr.value.row(0);
    n.op = Op::AddRow;
    n.a = a.id();
    n.b = row.id();
    n.requires_grad = na.requires_grad || nr.requires_grad;
    return push(std::move(n));
}

Var Tape::tanh(Var a) {
    const Node& na = node(a);
    Node n;
    n.value = na.value.tanh();
    n.op = Op::Tanh;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::softplus(Var a) {
    const Node& na = node(a);
    Node n;
    n.value = softplus_array(na.value);
    n.op = Op::Softplus;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::square(Var a) {
    const Node& na = node(a);
    Node n;
    n.value = na.value.square();
    n.op = Op::Square;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::mean(Var a) {
    const Node& na = node(a);
    Node n;
    n.value = Array::Constant(1, 1, na.value.mean());
    n.op = Op::Mean;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    const Node& na = node(a);
    Node n;
    n.value = Array::Constant(1, 1, na.value.sum());
    n.op = Op::Sum;
    n.a = a.id();
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::col(Var a, int j) {
    const Node& na = node(a);
    if (j < 0 || j >= na.value.cols()) throw ValidationError("column index out of range");
    Node n;
    n.value = na.value.col(j);
    n.op = Op::Col;
    n.a = a.id();
    n.i0 = j;
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

Var Tape::rows(Var a, int start, int count) {
    const Node& na = node(a);
    if (start < 0 || count < 0 || start + count > na.value.rows())
        throw ValidationError("row range out of bounds");
    Node n;
    n.value = na.value.middleRows(start, count);
    n.op = Op::Rows;
    n.a = a.id();
    n.i0 = start;
    n.i1 = count;
    n.requires_grad = na.requires_grad;
    return push(std::move(n));
}

void Tape::accumulate(int id, const Array& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
        n.grad = g;
    else
        n.grad += g;
}

void Tape::backward(Var out) {
    check(out);
    if (!is_scalar(nodes_[out.id()].value)) throw ValidationError("backward needs a 1x1 output");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[out.id()].grad = Array::Ones(1, 1);
    for (int id = out.id(); id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.size() == 0 || n.op == Op::Leaf) continue;
        const Array g = n.grad;
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add:
            accumulate(n.a, reduce_to(g, nodes_[n.a].value));
            accumulate(n.b, reduce_to(g, nodes_[n.b].value));
            break;
        case Op::Sub:
            accumulate(n.a, reduce_to(g, nodes_[n.a].value));
            accumulate(n.b, reduce_to(-g, nodes_[n.b].value));
            break;
        case Op::Mul: {
            const Array& va = nodes_[n.a].value;
            const Array& vb = nodes_[n.b].value;
            if (nodes_[n.a].requires_grad)
                accumulate(n.a, reduce_to(is_scalar(vb) ? Array(g * vb(0, 0)) : Array(g * vb), va));
            if (nodes_[n.b].requires_grad)
                accumulate(n.b, reduce_to(is_scalar(va) ? Array(g * va(0, 0)) : Array(g * va), vb));
            break;
        }
        case Op::Div: {
            const Array& va = nodes_[n.a].value;
            const Array& vb = nodes_[n.b].value;
            if (nodes_[n.a].requires_grad)
                accumulate(n.a, reduce_to(is_scalar(vb) ? Array(g / vb(0, 0)) : Array(g / vb), va));
            if (nodes_[n.b].requires_grad) {
                // d(a/b)/db = -(a/b)/b
                const Array gb = is_scalar(vb) ? Array(-g * n.value / vb(0, 0))
                                               : Array(-g * n.value / vb);
                accumulate(n.b, reduce_to(gb, vb));
            }
            break;
        }
        case Op::Neg:
            accumulate(n.a, -g);
            break;
        case Op::Scale:
            accumulate(n.a, n.c * g);
            break;
        case Op::Shift:
            accumulate(n.a, g);
            break;
        case Op::MatMul: {
            if (nodes_[n.a].requires_grad)
                accumulate(n.a, (g.matrix() * nodes_[n.b].value.matrix().transpose()).array());
            if (nodes_[n.b].requires_grad)
                accumulate(n.b, (nodes_[n.a].value.matrix().transpose() * g.matrix()).array());
            break;
        }
        case Op::AddRow:
            accumulate(n.a, g);
            if (nodes_[n.b].requires_grad) accumulate(n.b, g.colwise().sum());
            break;
        case Op::Tanh:
            accumulate(n.a, g * (1.0 - n.value.square()));
            break;
        case Op::Softplus:
            accumulate(n.a, g * sigmoid_array(nodes_[n.a].value));
            break;
        case Op::Square:
            accumulate(n.a, 2.0 * g * nodes_[n.a].value);
            break;
        case Op::Mean: {
            const Array& va = nodes_[n.a].value;
            accumulate(n.a, Array::Constant(va.rows(), va.cols(),
                                            g(0, 0) / static_cast<double>(va.size())));
            break;
        }
        case Op::Sum: {
            const Array& va = nodes_[n.a].value;
            accumulate(n.a, Array::Constant(va.rows(), va.cols(), g(0, 0)));
            break;
        }
        case Op::Col: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) break;
            if (na.grad.size() == 0) na.grad = Array::Zero(na.value.rows(), na.value.cols());
            na.grad.col(n.i0) += g.col(0);
            break;
        }
        case Op::Rows: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) break;
            if (na.grad.size() == 0) na.grad = Array::Zero(na.value.rows(), na.value.cols());
            na.grad.middleRows(n.i0, n.i1) += g;
            break;
        }
        }
    }
}

namespace {

Tape& tape_of(Var a, Var b) {
    if (!a.valid() || !b.valid() || a.tape() != b.tape())
        throw ValidationError("operands live on different tapes");
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (!a.valid()) throw ValidationError("empty variable");
    return *a.tape();
}

}  // namespace

Var operator+(Var a, Var b) { return tape_of(a, b).add(a, b); }
Var operator-(Var a, Var b) { return tape_of(a, b).sub(a, b); }
Var operator*(Var a, Var b) { return tape_of(a, b).mul(a, b); }
Var operator/(Var a, Var b) { return tape_of(a, b).div(a, b); }
Var operator-(Var a) { return tape_of(a).scale(a, -1.0); }
Var operator+(Var a, double c) { return tape_of(a).shift(a, c); }
Var operator+(double c, Var a) { return tape_of(a).shift(a, c); }
Var operator-(Var a, double c) { return tape_of(a).shift(a, -c); }
Var operator-(double c, Var a) { return tape_of(a).shift(tape_of(a).scale(a, -1.0), c); }
Var operator*(Var a, double c) { return tape_of(a).scale(a, c); }
Var operator*(double c, Var a) { return tape_of(a).scale(a, c); }
Var operator/(Var a, double c) { return tape_of(a).scale(a, 1.0 / c); }
Var operator/(double c, Var a) {
    Tape& t = tape_of(a);
    return t.div(t.scalar(c), a);
}

Var tanh(Var a) { return tape_of(a).tanh(a); }
Var softplus(Var a) { return tape_of(a).softplus(a); }
Var square(Var a) { return tape_of(a).square(a); }
Var mean(Var a) { return tape_of(a).mean(a); }
Var sum(Var a) { return tape_of(a).sum(a); }

}  // namespace espvfm::ad
