#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "futurerec/errors.hpp"

namespace futurerec {

class Tape;

namespace detail {

struct TensorNode {
    std::vector<int64_t> shape;
    std::vector<double> value;
    std::vector<double> grad;        // empty until a gradient first reaches this node
    bool requires_grad = false;
    const Tape* producer = nullptr;  // tape whose op created this node, if any

    int64_t size() const { return static_cast<int64_t>(value.size()); }

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

std::string shape_str(const std::vector<int64_t>& shape);
int64_t shape_numel(const std::vector<int64_t>& shape);

/// Dense row-major tensor of 64-bit floats. Handles share storage, so
/// copying a Tensor is cheap and two handles to the same node alias.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<int64_t> shape, double fill, bool requires_grad = false);
    static Tensor from_data(std::vector<int64_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const std::vector<int64_t>& shape() const { return n_->shape; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    int64_t dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int64_t size() const { return n_->size(); }

    /// First dim for matrices; scalars/vectors have rows() == 1 only via shape.
    int64_t rows() const;
    int64_t cols() const;

    std::vector<double>& data() { return n_->value; }
    const std::vector<double>& data() const { return n_->value; }
    double at(int64_t flat) const { return n_->value[static_cast<size_t>(flat)]; }

    /// Scalar value; contract error if the tensor is not a single element.
    double item() const;

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool v) { n_->requires_grad = v; }

    bool has_grad() const { return !n_->grad.empty(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad() { n_->grad.clear(); }

    /// Deep copy: fresh storage, same values; grad is not copied.
    Tensor clone() const;

    std::shared_ptr<detail::TensorNode> node() const { return n_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> n_;
};

/// Reverse-mode tape. Ops executed while a tape is active (see TapeScope)
/// append a backward rule; `backward` seeds d(loss)=1 and replays the rules
/// in reverse recording order, which visits every node after all of its
/// consumers. Gradients accumulate across repeated calls.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(const Tensor& out, std::function<void()> backward_fn);
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

    static Tape* active();

private:
    friend class TapeScope;
    struct Entry {
        std::shared_ptr<detail::TensorNode> out;
        std::function<void()> fn;
    };
    std::vector<Entry> entries_;
};

/// Makes a tape the active recording target on this thread for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

/// Fills with samples from Normal(0, stddev) truncated at +/- 2 stddev.
void fill_truncated_normal(Tensor& t, double stddev, std::mt19937_64& rng);

}  // namespace futurerec
