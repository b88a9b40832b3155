#include "futurerec/tensor.hpp"

#include <numeric>
#include <sstream>

namespace futurerec {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int64_t> shape, double fill, bool requires_grad) {
    auto n = std::make_shared<detail::TensorNode>();
    n->value.assign(static_cast<size_t>(shape_numel(shape)), fill);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<double> data,
                         bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw shape_error("tensor: shape " + shape_str(shape) + " does not match data length " +
                          std::to_string(data.size()));
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

int64_t Tensor::rows() const {
    if (ndim() != 2) throw shape_error("rows(): tensor is not 2-d, shape " + shape_str(shape()));
    return dim(0);
}

int64_t Tensor::cols() const {
    if (ndim() != 2) throw shape_error("cols(): tensor is not 2-d, shape " + shape_str(shape()));
    return dim(1);
}

double Tensor::item() const {
    if (size() != 1)
        throw contract_error("item(): tensor has " + std::to_string(size()) + " elements");
    return n_->value[0];
}

std::vector<double>& Tensor::grad() {
    if (n_->grad.empty())
        throw contract_error("grad(): no gradient accumulated; shape " + shape_str(shape()));
    return n_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (n_->grad.empty())
        throw contract_error("grad(): no gradient accumulated; shape " + shape_str(shape()));
    return n_->grad;
}

Tensor Tensor::clone() const {
    return from_data(n_->shape, n_->value, n_->requires_grad);
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& out, std::function<void()> backward_fn) {
    out.node()->producer = this;
    entries_.push_back({out.node(), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw contract_error("backward: loss must be a scalar, got shape " +
                             shape_str(loss.shape()));
    if (loss.node()->producer != this)
        throw contract_error("backward: loss was not produced under this tape");
    // leaf gradients accumulate across calls; intermediate ones start fresh
    for (auto& e : entries_) e.out->grad.clear();
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->out->grad.empty()) continue;  // no consumer on the path to the loss
        it->fn();
    }
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = prev_; }

void fill_truncated_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data()) {
        double s = dist(rng);
        while (std::abs(s) > 2.0 * stddev) s = dist(rng);
        v = s;
    }
}

}  // namespace futurerec
