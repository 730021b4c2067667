#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "stg/error.hpp"
#include "stg/rng.hpp"

namespace stg {

namespace detail {

template <typename T>
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until first touched
    bool requires_grad = false;
    bool leaf = true;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
    }
};

}  // namespace detail

// Dense tensor handle. Copies share the underlying node, so passing tensors
// around is cheap and gradient accumulation is visible to every holder.
template <typename T>
class Tensor {
public:
    using Node = detail::TensorNode<T>;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, bool requires_grad = false)
        : node_(std::make_shared<Node>()) {
        node_->shape = std::move(shape);
        node_->value.assign(node_->numel(), T(0));
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        return Tensor(std::move(shape), requires_grad);
    }

    static Tensor full(std::vector<std::size_t> shape, T fill, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::fill(t.data().begin(), t.data().end(), fill);
        return t;
    }

    static Tensor from_data(std::vector<std::size_t> shape, std::vector<T> values,
                            bool requires_grad = false) {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        if (t.node_->numel() != values.size())
            throw DimensionError("Tensor::from_data: value count does not match shape");
        t.node_->value = std::move(values);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(T v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }

    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->numel(); }

    // Row/col accessors for the common 2-D case.
    std::size_t rows() const {
        if (ndim() != 2) throw DimensionError("rows(): tensor is not 2-D");
        return node_->shape[0];
    }
    std::size_t cols() const {
        if (ndim() != 2) throw DimensionError("cols(): tensor is not 2-D");
        return node_->shape[1];
    }

    std::vector<T>& data() { return node_->value; }
    const std::vector<T>& data() const { return node_->value; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    bool is_leaf() const { return node_->leaf; }
    void mark_non_leaf() { node_->leaf = false; }

    T& at(std::size_t i) { return node_->value.at(i); }
    T at(std::size_t i) const { return node_->value.at(i); }
    T& at(std::size_t r, std::size_t c) { return node_->value.at(r * cols() + c); }
    T at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

    T item() const {
        if (numel() != 1) throw DimensionError("item(): tensor is not scalar");
        return node_->value[0];
    }

    bool all_finite() const {
        for (T v : node_->value)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    Tensor clone() const {
        Tensor t;
        t.node_ = std::make_shared<Node>(*node_);
        return t;
    }

    std::shared_ptr<Node> node() const { return node_; }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<Node> node_;
};

// Reverse-mode tape. Forward ops append a backward closure while a tape is
// active; backward() replays them in reverse. The tape is rebuilt every
// forward pass and never reused across optimizer steps.
template <typename T>
class Tape {
public:
    using NodePtr = std::shared_ptr<detail::TensorNode<T>>;

    void record(NodePtr out, std::function<void()> backward_fn) {
        steps_.push_back({std::move(out), std::move(backward_fn)});
    }

    // Seeds d(loss)/d(loss)=1 and propagates to every requires_grad leaf.
    // Leaf gradients accumulate across calls; intermediate gradients are
    // reset on each call.
    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1) throw DimensionError("backward: loss must be scalar");
        bool found = false;
        for (auto& s : steps_)
            if (s.out == loss.node()) found = true;
        if (!found) throw StateError("backward: loss was not produced by this tape");
        for (auto& s : steps_) {
            s.out->ensure_grad();
            std::fill(s.out->grad.begin(), s.out->grad.end(), T(0));
        }
        loss.node()->grad[0] = T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
    }

    void clear() { steps_.clear(); }
    std::size_t size() const { return steps_.size(); }

    static Tape*& active_slot() {
        thread_local Tape* active = nullptr;
        return active;
    }
    static Tape* active() { return active_slot(); }

private:
    struct Step {
        NodePtr out;
        std::function<void()> fn;
    };
    std::vector<Step> steps_;
};

// RAII activation of a tape for the enclosing scope.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& tape) : prev_(Tape<T>::active_slot()) {
        Tape<T>::active_slot() = &tape;
    }
    ~TapeScope() { Tape<T>::active_slot() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape<T>* prev_;
};

// Suppresses recording inside the scope (inference / extraction paths).
template <typename T>
class NoGradScope {
public:
    NoGradScope() : prev_(Tape<T>::active_slot()) { Tape<T>::active_slot() = nullptr; }
    ~NoGradScope() { Tape<T>::active_slot() = prev_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape<T>* prev_;
};

// Parameter initializers. All draws flow through the caller's RngState so
// initialization is reproducible bit-for-bit.
template <typename T>
void fill_xavier_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, RngState& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void fill_normal(Tensor<T>& w, double sigma, RngState& rng) {
    for (auto& v : w.data()) v = static_cast<T>(sigma * rng.normal());
}

}  // namespace stg
