#include <doctest.h>

#include "grad_problems.hpp"

using namespace mpda;
using namespace mpda::testing;

TEST_CASE("relative error definition")
{
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(0.0, 1e-9) == doctest::Approx(1e-3));
}

TEST_CASE("every op matches central differences on 5 seeds")
{
    const GradCheckOptions opt;
    for (const auto& op : op_problems())
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const GradCheckReport r = op.run(seed, opt);
            INFO(op.name << " seed " << seed << " worst " << r.worst_location << " err " << r.max_relative_error);
            CHECK(r.passed());
            CHECK(r.checked > 0);
        }
}

TEST_CASE("every network matches central differences on 5 seeds")
{
    const GradCheckOptions opt;
    for (const auto& net : network_problems(12))
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const GradCheckReport r = net.run(seed, opt);
            INFO(net.name << " seed " << seed << " worst " << r.worst_location << " err " << r.max_relative_error);
            CHECK(r.passed());
        }
}

TEST_CASE("a corrupted backward is caught")
{
    Rng rng(4);
    auto x = std::make_shared<DTensor>(random_tensor({3, 5}, rng));
    auto params = std::make_shared<DParams>(DParams{"fc", random_tensor({2, 5}, rng), random_tensor({2}, rng), {}, {}});
    auto w = std::make_shared<DTensor>(random_tensor({3, 2}, rng));
    auto gx = std::make_shared<DTensor>();
    GradCheckProblem<D> p;
    p.loss = [=] { return weighted_sum(linear(*x, *params), *w); };
    p.backward = [=] {
        params->weights.zero_grad();
        params->bias.zero_grad();
        *gx = linear_backward(*x, *params, *w);
        for (auto& g : params->weights.grad())
            g *= 1.01;
    };
    params->weights.require_grad();
    params->bias.require_grad();
    p.buffers.push_back({"weights", &params->weights.data(), &params->weights.grad()});
    const GradCheckReport r = grad_check(p);
    CHECK_FALSE(r.passed());
    CHECK(r.max_relative_error > 5e-3);
    CHECK(r.worst_location.rfind("weights[", 0) == 0);
}

TEST_CASE("a non-scalar loss head is a contract error")
{
    auto x = std::make_shared<DTensor>(Shape{2, 2}, 1.0);
    GradCheckProblem<D> p;
    p.loss = [x] { return relu(*x); };
    p.backward = [] {};
    p.buffers.push_back({"x", &x->data(), &x->data()});
    CHECK_THROWS_AS(grad_check(p), ContractError);
}

TEST_CASE("float nets cast to double keep their values")
{
    const Network enc = build_encoder(7);
    const BasicNetwork<double> d = enc.cast<double>();
    const auto a = enc.trainable();
    const auto b = d.trainable();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i]->numel(); ++j)
            REQUIRE(static_cast<double>((*a[i])[j]) == (*b[i])[j]);
}
