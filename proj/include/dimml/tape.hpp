#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "dimml/tensor.hpp"

namespace dimml {

class Tape;

// A tensor value plus its position on a tape. node < 0 marks a constant:
// no gradient flows through it. stop_gradient() produces exactly such a
// handle without copying the underlying data semantics.
struct Var {
    Tensor value;
    int node = -1;

    bool tracked() const { return node >= 0; }
};

// Gradients of a scalar loss with respect to registered leaves, keyed by
// leaf node id. Leaves the loss never touched read back as exact zeros.
class GradMap {
public:
    // Gradient for a leaf (or stop-gradient handle); zeros when absent.
    Tensor grad(const Var& leaf) const;
    bool has(const Var& leaf) const;

private:
    friend class Tape;
    std::unordered_map<int, Tensor> grads_;
};

// Reverse-mode gradient tape. Records every operation applied to tracked
// Vars; backward() replays them newest-to-oldest with a fixed reduction
// order, so gradient accumulation is bitwise deterministic. Operations
// whose inputs are all constants record nothing and stay constants.
//
// A tape is exclusively owned by one training context; it is neither
// copyable nor movable and does no internal locking.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a trainable leaf.
    Var leaf(Tensor value);

    static Var constant(Tensor value) { return Var{std::move(value), -1}; }

    // Marks a value as not passing gradient backward.
    Var stop_gradient(const Var& v) const { return Var{v.value, -1}; }

    // --- elementwise ---
    Var add(const Var& a, const Var& b);
    Var sub(const Var& a, const Var& b);
    Var mul(const Var& a, const Var& b);
    Var scale(const Var& a, double c);
    Var relu(const Var& a);

    // --- linear algebra ---
    Var matmul(const Var& a, const Var& b);
    Var transpose(const Var& a);
    // X: [B x d], bias: rank-1 [d]; adds bias to every row.
    Var add_rowvec(const Var& x, const Var& bias);

    // --- reductions / selections ---
    Var sum_all(const Var& a);
    Var mean_all(const Var& a);
    // logits: [B x K]; picks entry [j, labels[j]] per row -> rank-1 [B].
    Var select_labels(const Var& m, const std::vector<int>& labels);
    // X: [B x d]; keeps the listed columns in the given order -> [B x s].
    Var select_cols(const Var& x, const std::vector<int>& dims);
    Var concat_cols(const std::vector<Var>& parts);
    // Square [n x n] -> rank-1 [n] diagonal.
    Var diag(const Var& m);

    // --- row-wise nonlinearities ---
    Var log_softmax(const Var& logits);

    // Euclidean distance matrix: A [n x s], B [m x s] -> [n x m] with
    // D_ij = |a_i - b_j|_2. Zero distances get zero backward flow.
    Var pairwise_dist(const Var& a, const Var& b);

    // Gradients of a scalar loss for every registered leaf. Throws
    // validation_error unless loss has exactly one element. A constant
    // loss (nothing recorded) yields all-zero gradients.
    GradMap backward(const Var& loss);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    using PullFn = std::function<void(Tape&, const Tensor&)>;

    struct Node {
        PullFn pull;  // empty for leaves
    };

    int push_node(PullFn pull);
    void accumulate(int node, Tensor g);

    std::vector<Node> nodes_;
    std::vector<Tensor> adjoint_;  // live only during backward()
    std::vector<int> leaves_;
};

}  // namespace dimml
