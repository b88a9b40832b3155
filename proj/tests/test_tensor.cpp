#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "futurerec/ops.hpp"
#include "futurerec/tensor.hpp"

using namespace futurerec;

TEST_CASE("shape/data invariants") {
    Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), shape_error);
    CHECK_THROWS_AS(t.item(), contract_error);
    CHECK(Tensor::scalar(4.5).item() == 4.5);
}

TEST_CASE("backward requires a scalar produced under the tape") {
    Tensor x = Tensor::from_data({3}, {1, 2, 3}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor y = ops::scalar_mul(x, 2.0);
        CHECK_THROWS_AS(tape.backward(y), contract_error);  // not scalar
    }
    Tensor leaf = Tensor::scalar(1.0, true);
    CHECK_THROWS_AS(tape.backward(leaf), contract_error);  // not produced under tape

    Tape other;
    Tensor loss;
    {
        TapeScope scope(other);
        loss = ops::sum(x);
    }
    CHECK_THROWS_AS(tape.backward(loss), contract_error);  // wrong tape
}

TEST_CASE("backward: sum gives ones, repeated calls accumulate") {
    Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = ops::sum(x);
    }
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("backward: quadratic loss x^T x / 2 has gradient x") {
    Tensor x = Tensor::from_data({4}, {0.3, -1.2, 2.0, 0.0}, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = ops::scalar_mul(ops::sum(ops::mul(x, x)), 0.5);
    }
    tape.backward(loss);
    for (int64_t i = 0; i < x.size(); ++i)
        CHECK(x.grad()[static_cast<size_t>(i)] == doctest::Approx(x.at(i)).epsilon(1e-12));
}

TEST_CASE("no recording happens without an active tape") {
    Tensor x = Tensor::from_data({2}, {1, 2}, true);
    Tensor y = ops::scalar_mul(x, 3.0);
    CHECK_FALSE(y.requires_grad());  // inference mode: values only
}

TEST_CASE("detach blocks gradient flow") {
    Tensor x = Tensor::from_data({2}, {2.0, -3.0}, true);

    // y = detach(x); loss = sum(y * x); dloss/dx must equal value(y) exactly.
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        Tensor y = ops::detach(x);
        CHECK_FALSE(y.requires_grad());
        loss = ops::sum(ops::mul(y, x));
    }
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == -3.0);

    // a function of detach(x) contributes nothing to x's gradient: with a
    // parallel live path of known gradient 1, only that 1 shows up
    x.zero_grad();
    Tape tape2;
    Tensor loss2;
    {
        TapeScope scope(tape2);
        loss2 = ops::sum(ops::add(ops::exp(ops::detach(x)), x));
    }
    tape2.backward(loss2);
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("a tensor produced by detach never accumulates gradient") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tensor d = ops::detach(x);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = ops::sum(ops::mul(d, x));
    }
    tape.backward(loss);
    CHECK_FALSE(d.has_grad());
    CHECK(x.grad() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("determinism: same seed gives bitwise-identical values and gradients") {
    auto run = [] {
        std::mt19937_64 rng(99);
        Tensor a = Tensor::zeros({4, 4}, true);
        fill_truncated_normal(a, 0.5, rng);
        Tensor b = Tensor::zeros({4, 4}, true);
        fill_truncated_normal(b, 0.5, rng);
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = ops::sum(ops::relu(ops::matmul(a, b)));
        }
        tape.backward(loss);
        std::vector<double> out = a.data();
        out.insert(out.end(), a.grad().begin(), a.grad().end());
        out.insert(out.end(), b.grad().begin(), b.grad().end());
        out.push_back(loss.item());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("truncated normal stays within two standard deviations") {
    std::mt19937_64 rng(1);
    Tensor t = Tensor::zeros({1000});
    fill_truncated_normal(t, 0.02, rng);
    for (double v : t.data()) CHECK(std::abs(v) <= 0.04);
}

TEST_CASE("clone is a deep copy") {
    Tensor a = Tensor::from_data({2}, {1, 2}, true);
    Tensor b = a.clone();
    b.data()[0] = 42.0;
    CHECK(a.at(0) == 1.0);
    CHECK(b.requires_grad());
}
