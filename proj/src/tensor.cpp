#include "dimml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dimml/errors.hpp"

namespace dimml {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw validation_error("tensor shape entries must be positive");
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    return full(std::move(shape), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t;
    std::size_t n = checked_numel(shape);
    t.shape_ = std::move(shape);
    t.data_.assign(n, value);
    t.cols_ = t.shape_.empty() ? 1 : t.shape_.back();
    t.rank0_ = t.shape_.empty();
    return t;
}

Tensor Tensor::scalar(double value) {
    return full({}, value);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
    std::size_t n = checked_numel(shape);
    if (n != data.size()) {
        throw validation_error("tensor data length does not match shape product");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    t.cols_ = t.shape_.empty() ? 1 : t.shape_.back();
    t.rank0_ = t.shape_.empty();
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t = zeros({n, n});
    for (int i = 0; i < n; ++i) {
        t.at(i, i) = 1.0;
    }
    return t;
}

int Tensor::rows() const {
    if (rank() != 2) {
        throw validation_error("rows() requires a rank-2 tensor, got shape " + shape_str());
    }
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) {
        throw validation_error("cols() requires a rank-2 tensor, got shape " + shape_str());
    }
    return shape_[1];
}

double Tensor::value() const {
    if (numel() != 1) {
        throw validation_error("value() requires a one-element tensor, got shape " + shape_str());
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        os << (i ? "x" : "") << shape_[i];
    }
    os << "]";
    return os.str();
}

namespace {

// Applies fn(row_begin, width) over the rows of a rank-1 or rank-2 tensor.
template <typename Fn>
Tensor rowwise_unary(const Tensor& in, const char* op, Fn fn) {
    if (!in.defined() || in.numel() == 0) {
        throw validation_error(std::string(op) + ": empty tensor");
    }
    int r = 1;
    int c = static_cast<int>(in.numel());
    if (in.rank() == 2) {
        r = in.rows();
        c = in.cols();
    } else if (in.rank() > 2) {
        throw validation_error(std::string(op) + ": expects rank 1 or 2, got " + in.shape_str());
    }
    Tensor out = Tensor::from(in.shape(), in.data());
    for (int i = 0; i < r; ++i) {
        fn(&out.data()[static_cast<std::size_t>(i) * c], c);
    }
    return out;
}

}  // namespace

Tensor softmax(const Tensor& logits) {
    return rowwise_unary(logits, "softmax", [](double* row, int k) {
        double m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            row[j] = std::exp(row[j] - m);
            sum += row[j];
        }
        for (int j = 0; j < k; ++j) row[j] /= sum;
    });
}

Tensor log_softmax(const Tensor& logits) {
    return rowwise_unary(logits, "log_softmax", [](double* row, int k) {
        double m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(row[j] - m);
        double lse = m + std::log(sum);
        for (int j = 0; j < k; ++j) row[j] -= lse;
    });
}

std::vector<int> argmax_rows(const Tensor& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < m.cols(); ++j) {
            if (m.at(i, j) > m.at(i, best)) best = j;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace dimml
