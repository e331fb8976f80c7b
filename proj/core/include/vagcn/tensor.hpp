#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vagcn/errors.hpp"

namespace vagcn {

using Shape = std::vector<size_t>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

template <class T>
class Tape;

// Dense row-major tensor. Copies are shallow (storage is shared); operations
// never mutate their inputs. A tensor participates in autodiff when bound to
// a tape node (node() >= 0).
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(shape_numel(shape_), T(0))) {}

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
        if (values.size() != shape_numel(shape_))
            throw ShapeError("tensor init: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape_));
        data_ = std::make_shared<std::vector<T>>(std::move(values));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T v) {
        Tensor t(std::move(shape));
        for (T& x : *t.data_) x = v;
        return t;
    }

    static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    bool defined() const { return static_cast<bool>(data_); }
    const Shape& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t extent(size_t axis) const { return shape_.at(axis); }
    size_t size() const { return data_ ? data_->size() : 0; }

    T* data() { return data_->data(); }
    const T* data() const { return data_->data(); }
    std::vector<T>& values() { return *data_; }
    const std::vector<T>& values() const { return *data_; }
    T& operator[](size_t i) { return (*data_)[i]; }
    const T& operator[](size_t i) const { return (*data_)[i]; }

    /// Scalar access; requires size() == 1.
    T item() const {
        if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
        return (*data_)[0];
    }

    bool requires_grad() const { return node_ >= 0; }
    int node() const { return node_; }
    Tape<T>* tape() const { return tape_; }

    /// Internal: bind this tensor to an autodiff tape node.
    void set_node(Tape<T>* tape, int node) {
        tape_ = tape;
        node_ = node;
    }

    /// Deep copy, not bound to any tape.
    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        if (data_) t.data_ = std::make_shared<std::vector<T>>(*data_);
        return t;
    }

    /// Same storage, new shape (element count must match), not tape-bound.
    Tensor viewed(Shape shape) const {
        if (shape_numel(shape) != size())
            throw ShapeError("view: cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> v(size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>((*data_)[i]);
        return Tensor<U>(shape_, std::move(v));
    }

    bool all_finite() const {
        for (const T& x : *data_)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

private:
    Shape shape_;
    std::shared_ptr<std::vector<T>> data_;
    Tape<T>* tape_ = nullptr;
    int node_ = -1;
};

// Reverse-mode tape: an ordered record of executed operations. Operations are
// appended in execution order, which is a topological order by construction;
// backward() walks them once in reverse. Single-threaded per instance.
template <class T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&)>;

    /// Registers a leaf value. Gradients accumulate under the returned
    /// tensor's node id.
    Tensor<T> leaf(const Tensor<T>& value) {
        Tensor<T> t = value;
        t.set_node(this, alloc_node(value.size()));
        return t;
    }

    int alloc_node(size_t n) {
        node_numel_.push_back(n);
        grads_.emplace_back();
        return static_cast<int>(node_numel_.size() - 1);
    }

    void record(BackwardFn fn) {
        ops_.push_back(std::move(fn));
        fresh_ops_ = true;
    }

    /// Reverse-topological gradient accumulation from a scalar loss.
    /// Re-running backward without recording new forward work is an error.
    void backward(const Tensor<T>& loss) {
        if (loss.tape() != this || loss.node() < 0)
            throw ValueError("backward: loss is not on this tape");
        if (loss.size() != 1)
            throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
        if (ran_backward_ && !fresh_ops_)
            throw ValueError("backward: tape is stale (no forward work since last backward)");
        for (auto& g : grads_) g.clear();
        grad_buf(loss.node()).assign(1, T(1));
        for (size_t i = ops_.size(); i-- > 0;) ops_[i](*this);
        ran_backward_ = true;
        fresh_ops_ = false;
    }

    /// Gradient buffer for a node, zero-initialized on first touch.
    std::vector<T>& grad_buf(int node) {
        auto& g = grads_.at(static_cast<size_t>(node));
        if (g.empty()) g.assign(node_numel_[static_cast<size_t>(node)], T(0));
        return g;
    }

    /// True if any gradient has been accumulated into the node.
    bool grad_touched(int node) const { return !grads_.at(static_cast<size_t>(node)).empty(); }

    /// Gradient of a tensor on this tape; zeros if nothing reached it.
    std::span<const T> grad(const Tensor<T>& t) {
        if (t.tape() != this || t.node() < 0)
            throw ValueError("grad: tensor is not on this tape");
        return grad_buf(t.node());
    }

    size_t num_ops() const { return ops_.size(); }

private:
    std::vector<size_t> node_numel_;
    std::vector<std::vector<T>> grads_;
    std::vector<BackwardFn> ops_;
    bool ran_backward_ = false;
    bool fresh_ops_ = false;
};

// Picks the common tape of an op's inputs (nullptr when untracked).
template <class T, class... Ts>
Tape<T>* common_tape(const Tensor<T>& first, const Ts&... rest) {
    Tape<T>* tape = first.tape();
    ((tape = tape ? tape : rest.tape()), ...);
    if (tape) {
        auto check = [&](const Tensor<T>& t) {
            if (t.tape() && t.tape() != tape)
                throw ValueError("operands belong to different tapes");
        };
        check(first);
        (check(rest), ...);
    }
    return tape;
}

}  // namespace vagcn
