#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "lgsrr/core/tensor.hpp"

namespace lgsrr::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and has not been cleared.
class Var {
public:
    Var() = default;

    Tape& tape() const { return *tape_; }
    std::uint32_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    std::size_t size() const;
    std::size_t rows() const;
    std::size_t cols() const;
    std::span<const double> value() const;
    double scalar() const;
    bool requires_grad() const;

    Vec value_vec() const;
    Mat value_mat() const;
    /// Gradient accumulated by the last backward pass; zeros if none reached.
    Vec grad_vec() const;
    Mat grad_mat() const;

private:
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;

    friend class Tape;
};

/// Reverse-mode tape. Every recorded node stores its value and, when any input
/// requires a gradient, a closure that pushes its output gradient to inputs.
/// Single-threaded; use one tape per sample for parallel work.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::uint32_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(const Vec& v);
    Var variable(const Mat& m);
    Var constant(const Vec& v);
    Var constant(const Mat& m);
    Var constant(double x);

    /// Record an op result. The backward closure is dropped when no parent
    /// requires a gradient.
    Var record(std::vector<double> value, std::size_t rows, std::size_t cols,
               std::initializer_list<Var> parents, Backward backward);
    Var record(std::vector<double> value, std::size_t rows, std::size_t cols,
               std::span<const Var> parents, Backward backward);

    /// Seeds d(output)/d(output) = 1 and replays the tape in reverse.
    void backward(Var scalar_output);

    void zero_grad();
    void clear();
    std::size_t size() const noexcept { return nodes_.size(); }

    std::span<const double> value(std::uint32_t id) const { return nodes_[id].value; }
    std::size_t rows(std::uint32_t id) const { return nodes_[id].rows; }
    std::size_t cols(std::uint32_t id) const { return nodes_[id].cols; }
    bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

    /// Output gradient of a node during backward. Empty when nothing flowed in.
    std::span<const double> grad(std::uint32_t id) const { return nodes_[id].grad; }
    /// Mutable gradient buffer of an input node, allocated on first use.
    std::span<double> accum(std::uint32_t id);

private:
    struct Node {
        std::vector<double> value;
        std::vector<double> grad;
        std::size_t rows = 0;
        std::size_t cols = 0;
        bool requires_grad = false;
        Backward backward;
    };

    Var push(std::vector<double> value, std::size_t rows, std::size_t cols, bool requires_grad);

    std::vector<Node> nodes_;
};

} // namespace lgsrr::ad
