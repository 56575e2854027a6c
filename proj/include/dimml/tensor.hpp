#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dimml {

// Dense row-major tensor of 64-bit floats. Immutable by convention once
// built: every operation returns a new value, so tensors can be shared
// across threads freely. Rank 0 denotes a scalar (numel == 1).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor from(std::vector<int> shape, std::vector<double> data);
    static Tensor identity(int n);

    bool defined() const { return !data_.empty() || rank0_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }

    // Rank-2 accessors.
    int rows() const;
    int cols() const;
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    // Scalar extraction; throws unless numel == 1.
    double value() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
    int cols_ = 0;        // cached stride for rank-2 access
    bool rank0_ = false;  // distinguishes default-constructed from scalar
};

// Row-wise numerically stable softmax. Accepts a rank-1 tensor (one row)
// or a rank-2 tensor (softmax per row). Throws on empty input.
Tensor softmax(const Tensor& logits);

// Row-wise log-softmax with the same shape rules as softmax().
Tensor log_softmax(const Tensor& logits);

// Per-row argmax of a rank-2 tensor; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& m);

}  // namespace dimml
