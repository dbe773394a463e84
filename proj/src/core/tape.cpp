#include "lgsrr/core/tape.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lgsrr::ad {

std::size_t Var::size() const { return tape_->value(id_).size(); }
std::size_t Var::rows() const { return tape_->rows(id_); }
std::size_t Var::cols() const { return tape_->cols(id_); }
std::span<const double> Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::scalar() const {
    const auto v = value();
    if (v.size() != 1) {
        throw std::logic_error("Var::scalar on node of size " + std::to_string(v.size()));
    }
    return v[0];
}

Vec Var::value_vec() const {
    const auto v = value();
    return Vec(std::vector<double>(v.begin(), v.end()));
}

Mat Var::value_mat() const {
    const auto v = value();
    return Mat(rows(), cols(), std::vector<double>(v.begin(), v.end()));
}

Vec Var::grad_vec() const {
    const auto g = tape_->grad(id_);
    if (g.empty()) {
        return Vec(size());
    }
    return Vec(std::vector<double>(g.begin(), g.end()));
}

Mat Var::grad_mat() const {
    const auto g = tape_->grad(id_);
    if (g.empty()) {
        return Mat(rows(), cols());
    }
    return Mat(rows(), cols(), std::vector<double>(g.begin(), g.end()));
}

Var Tape::push(std::vector<double> value, std::size_t rows, std::size_t cols, bool requires_grad) {
    if (value.size() != rows * cols) {
        throw std::logic_error("tape node shape " + describe_dim(rows, cols) +
                               " does not match value length " + std::to_string(value.size()));
    }
    Node node;
    node.value = std::move(value);
    node.rows = rows;
    node.cols = cols;
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::variable(const Vec& v) { return push(v.values(), v.dim(), 1, true); }
Var Tape::variable(const Mat& m) { return push(m.values(), m.rows(), m.cols(), true); }
Var Tape::constant(const Vec& v) { return push(v.values(), v.dim(), 1, false); }
Var Tape::constant(const Mat& m) { return push(m.values(), m.rows(), m.cols(), false); }
Var Tape::constant(double x) { return push({x}, 1, 1, false); }

Var Tape::record(std::vector<double> value, std::size_t rows, std::size_t cols,
                 std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), rows, cols, std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
}

Var Tape::record(std::vector<double> value, std::size_t rows, std::size_t cols,
                 std::span<const Var> parents, Backward backward) {
    bool needs = false;
    for (const Var& p : parents) {
        if (p.tape_ != this) {
            throw std::logic_error("tape op mixes nodes from different tapes");
        }
        needs = needs || nodes_[p.id_].requires_grad;
    }
    Var out = push(std::move(value), rows, cols, needs);
    if (needs) {
        nodes_.back().backward = std::move(backward);
    }
    return out;
}

std::span<double> Tape::accum(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
        n.grad.assign(n.value.size(), 0.0);
    }
    return n.grad;
}

void Tape::zero_grad() {
    for (Node& n : nodes_) {
        n.grad.clear();
    }
}

void Tape::backward(Var scalar_output) {
    if (scalar_output.tape_ != this || scalar_output.size() != 1) {
        throw std::logic_error("backward requires a scalar node on this tape");
    }
    zero_grad();
    accum(scalar_output.id_)[0] = 1.0;
    for (std::uint32_t id = scalar_output.id_ + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.backward && !n.grad.empty()) {
            n.backward(*this, id);
        }
    }
}

void Tape::clear() { nodes_.clear(); }

} // namespace lgsrr::ad
