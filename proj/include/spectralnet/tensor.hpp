#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectralnet {

// N-dimensional array of doubles, row-major. Cheap to copy: Tensor is a
// shared handle, so parameters held by a network and by the optimizer are
// the same storage. The grad buffer exists only once grad() is touched.
class Tensor {
   public:
    Tensor() : d_(std::make_shared<Data>()) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        Tensor t;
        t.d_->shape = std::move(shape);
        t.d_->data.assign(count(t.d_->shape), 0.0);
        t.d_->requires_grad = requires_grad;
        return t;
    }

    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::fill(t.d_->data.begin(), t.d_->data.end(), value);
        return t;
    }

    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad = false) {
        if (data.size() != count(shape))
            throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape volume " +
                                        std::to_string(count(shape)));
        Tensor t;
        t.d_->shape = std::move(shape);
        t.d_->data = std::move(data);
        t.d_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from_data({}, {value}, requires_grad);
    }

    const std::vector<std::size_t>& shape() const { return d_->shape; }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t size() const { return d_->data.size(); }
    std::size_t dim(std::size_t i) const { return d_->shape.at(i); }

    // Handle semantics, like a shared_ptr: a const Tensor still exposes
    // mutable storage, since constness sits on the handle, not the buffer.
    double* data() const { return d_->data.data(); }
    std::vector<double>& vec() const { return d_->data; }

    double item() const {
        if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
        return d_->data[0];
    }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool v) { d_->requires_grad = v; }

    bool has_grad() const { return !d_->grad.empty(); }

    // Accumulation buffer, same shape as data; allocated zeroed on demand.
    std::vector<double>& grad() const {
        if (d_->grad.empty()) d_->grad.assign(d_->data.size(), 0.0);
        return d_->grad;
    }

    void zero_grad() const {
        if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
    }

    // Identity of the underlying storage; two handles alias iff keys match.
    const void* key() const { return d_.get(); }

    bool all_finite() const {
        for (double v : d_->data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor clone() const {
        Tensor t;
        t.d_->shape = d_->shape;
        t.d_->data = d_->data;
        t.d_->requires_grad = d_->requires_grad;
        return t;
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }

   private:
    struct Data {
        std::vector<std::size_t> shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Data> d_;
};

// Recorded tape of forward operations. Nodes are appended in execution
// order, so every input precedes its consumers and a single reverse sweep
// is a valid topological backward traversal.
class Graph {
   public:
    void record(const char* op, std::function<void()> backward_fn) {
        nodes_.push_back(Node{op, std::move(backward_fn)});
    }

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Populates grads of every requires_grad tensor reachable from loss.
    // Grads accumulate across calls; the caller zeroes between steps.
    void backward(Tensor loss) {
        if (loss.size() != 1)
            throw std::invalid_argument("Graph::backward: loss must be a scalar");
        loss.grad()[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_fn();
    }

   private:
    struct Node {
        const char* op;
        std::function<void()> backward_fn;
    };
    std::vector<Node> nodes_;
};

inline void backward(Graph& graph, const Tensor& loss) { graph.backward(loss); }

}  // namespace spectralnet
