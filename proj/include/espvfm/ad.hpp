#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "espvfm/errors.hpp"

namespace espvfm::ad {

using Array = Eigen::ArrayXXd;

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,      // c * a
    Shift,      // a + c
    MatMul,
    AddRow,     // matrix + broadcast row
    Tanh,
    Softplus,
    Square,
    Mean,
    Sum,
    Col,
    Rows,
};

class Tape;

/// Handle to a tape node. Default-constructed handles are empty.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    const Array& value() const;
    const Array& grad() const;
    double scalar() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape over dense arrays. Binary elementwise ops accept equal
/// shapes or a 1x1 operand on either side; anything else is rejected when
/// the node is built.
class Tape {
public:
    Tape() { nodes_.reserve(512); }

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    Var leaf(Array value, bool requires_grad = true);
    Var constant(Array value) { return leaf(std::move(value), false); }
    Var scalar(double v, bool requires_grad = false);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var neg(Var a);
    Var scale(Var a, double c);
    Var shift(Var a, double c);
    Var matmul(Var a, Var b);
    Var add_row(Var a, Var row);
    Var tanh(Var a);
    Var softplus(Var a);
    Var square(Var a);
    Var mean(Var a);
    Var sum(Var a);
    Var col(Var a, int j);
    Var rows(Var a, int start, int count);

    /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates to every node
    /// that depends on a gradient-requiring leaf.
    void backward(Var out);

    const Array& value(int id) const { return nodes_[id].value; }
    const Array& grad(int id) const;

private:
    struct Node {
        Array value;
        Array grad;
        int a = -1, b = -1;
        double c = 0;
        int i0 = 0, i1 = 0;
        Op op = Op::Leaf;
        bool requires_grad = false;
    };

    Var push(Node n);
    Node& node(Var v);
    void check(Var v) const;
    void accumulate(int id, const Array& g);
    template <class F>
    Var elementwise(Op op, Var a, Var b, F&& f);

    std::vector<Node> nodes_;
    Array zero_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator/(double c, Var a);

Var tanh(Var a);
Var softplus(Var a);
Var square(Var a);
Var mean(Var a);
Var sum(Var a);

/// Numerically stable softplus, sigmoid and inverse softplus on doubles.
double softplus(double x);
double sigmoid(double x);
double softplus_inverse(double y);

}  // namespace espvfm::ad
