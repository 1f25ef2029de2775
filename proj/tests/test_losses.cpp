#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "grad_problems.hpp"
#include "mpda/losses.hpp"

using namespace mpda;
using namespace mpda::testing;

namespace {

Tensor column(std::vector<float> v)
{
    const std::size_t n = v.size();
    return Tensor({n, 1}, std::move(v));
}

}  // namespace

TEST_CASE("bce examples")
{
    CHECK(bce(column({0.5f}), column({1.0f})).value == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(bce(column({0.5f}), column({1.0f})).value == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(bce(column({0.2f}), column({0.0f})).value == doctest::Approx(-std::log(0.8)).epsilon(1e-6));
    CHECK(bce(column({0.2f}), column({0.0f})).value == doctest::Approx(0.2231).epsilon(1e-4));
    const double near_one = bce(BasicTensor<double>({1, 1}, std::vector<double>{1 - 1e-7}),
                                BasicTensor<double>({1, 1}, std::vector<double>{1.0}))
                                .value;
    CHECK(near_one == doctest::Approx(1e-7).epsilon(1e-3));
    CHECK(bce(column({0.5f}), column({1.0f})).kind == LossKind::task1);
    CHECK_THROWS_AS(bce(column({0.5f}), column({0.5f})), ContractError);
    CHECK_THROWS_AS(bce(column({0.5f}), column({2.0f})), ContractError);
    CHECK_THROWS_AS(bce(column({0.5f, 0.5f}), column({1.0f})), ContractError);
}

TEST_CASE("domain loss examples")
{
    CHECK(domain_loss(column({0.5f}), column({0.5f})).value == doctest::Approx(2 * std::log(2.0)).epsilon(1e-6));
    CHECK(domain_loss(column({0.5f}), column({0.5f})).value == doctest::Approx(1.3863).epsilon(1e-4));
    CHECK(domain_loss(column({0.9f}), column({0.8f})).value ==
          doctest::Approx(-std::log(0.1) - std::log(0.8)).epsilon(1e-5));
    CHECK(domain_loss(column({0.9f}), column({0.8f})).value == doctest::Approx(2.5257).epsilon(1e-4));
    CHECK(domain_loss(column({1e-7f}), column({1.0f - 1e-7f})).value < 1e-5);
    CHECK(domain_loss(column({0.5f}), column({0.5f})).kind == LossKind::domain);
    CHECK_THROWS_AS(domain_loss(Tensor(), column({0.5f})), std::exception);
    CHECK_THROWS_AS(domain_loss(column({0.5f}), Tensor()), std::exception);
}

TEST_CASE("domain loss is permutation invariant within each domain")
{
    Rng rng(12);
    std::vector<float> s(7), t(5);
    for (auto& v : s)
        v = static_cast<float>(rng.uniform(0.05, 0.95));
    for (auto& v : t)
        v = static_cast<float>(rng.uniform(0.05, 0.95));
    const double base = domain_loss(column(s), column(t)).value;
    for (int k = 0; k < 10; ++k) {
        rng.shuffle(s.begin(), s.end());
        rng.shuffle(t.begin(), t.end());
        CHECK(domain_loss(column(s), column(t)).value == doctest::Approx(base).epsilon(1e-6));
    }
}

TEST_CASE("encoder loss examples")
{
    const LossValue t1{0.5, LossKind::task1}, t2{0.4, LossKind::task2}, d{1.3863, LossKind::domain};
    const LossValue e = encoder_loss(t1, t2, d, 1.0);
    CHECK(e.value == doctest::Approx(-0.4863).epsilon(1e-6));
    CHECK(e.kind == LossKind::encoder);
    CHECK(encoder_loss(t1, t2, d, 0.0).value == doctest::Approx(0.9));
    CHECK(encoder_loss(t1, t2, std::nullopt, 1.0).value == doctest::Approx(0.9));
    CHECK_THROWS_AS(encoder_loss(t1, t2, d, -0.1), ContractError);
}

TEST_CASE("discrepancy examples")
{
    CHECK(discrepancy_loss(column({0.5f}), column({0.5f}), DiscrepancyMetric::symmetric_bce).value ==
          doctest::Approx(0.6931).epsilon(1e-4));
    const double h99 = -(0.99 * std::log(0.99) + 0.01 * std::log(0.01));
    const double v = discrepancy_loss(column({0.99f}), column({0.99f}), DiscrepancyMetric::symmetric_bce).value;
    CHECK(v == doctest::Approx(h99).epsilon(1e-4));
    CHECK(v == doctest::Approx(0.0560).epsilon(1e-3));
    CHECK(discrepancy_loss(column({0.3f, 0.8f}), column({0.3f, 0.8f}), DiscrepancyMetric::l1).value == 0.0);
    CHECK(discrepancy_loss(column({0.3f}), column({0.8f}), DiscrepancyMetric::l1).value == doctest::Approx(0.5));
    CHECK_THROWS_AS(discrepancy_loss(column({0.3f}), column({0.3f, 0.2f}), DiscrepancyMetric::l1), ContractError);
    CHECK(parse_discrepancy_metric("symmetric-bce") == DiscrepancyMetric::symmetric_bce);
    CHECK(parse_discrepancy_metric("l1") == DiscrepancyMetric::l1);
    CHECK(std::string(discrepancy_metric_name(DiscrepancyMetric::l1)) == "l1");
}

TEST_CASE("symmetric bce is symmetric and l1 gradient is a sign")
{
    const Tensor a = column({0.2f, 0.7f, 0.9f}), b = column({0.6f, 0.65f, 0.1f});
    CHECK(discrepancy_loss(a, b, DiscrepancyMetric::symmetric_bce).value ==
          doctest::Approx(discrepancy_loss(b, a, DiscrepancyMetric::symmetric_bce).value));
    Tensor g1, g2;
    discrepancy_loss(a, b, DiscrepancyMetric::l1, &g1, &g2);
    CHECK(g1[0] == doctest::Approx(-1.0 / 3));
    CHECK(g2[0] == doctest::Approx(1.0 / 3));
    CHECK(g1[2] == doctest::Approx(1.0 / 3));
}

TEST_CASE("phase-3 classifier losses")
{
    const LossValue t1{0.3, LossKind::task1}, t2{0.25, LossKind::task2}, dis{0.2, LossKind::discrepancy};
    const auto [a, b] = classifier_losses_phase3(t1, t2, dis);
    CHECK(a.value == doctest::Approx(0.5));
    CHECK(b.value == doctest::Approx(0.45));
    CHECK(a.kind == LossKind::task1_prime);
    CHECK(b.kind == LossKind::task2_prime);
    const auto [c, d] = classifier_losses_phase3(t1, t2, {0.0, LossKind::discrepancy});
    CHECK(c.value == t1.value);
    CHECK(d.value == t2.value);
}

TEST_CASE("loss gradients match central differences")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const GradCheckReport r = check_losses(seed, {});
        INFO("seed " << seed << " worst " << r.worst_location << " err " << r.max_relative_error);
        CHECK(r.passed());
    }
}

TEST_CASE("gradient of L'_t1 w.r.t. a task head is the sum of its parts")
{
    // Source rows carry the task loss, target rows the discrepancy against a
    // frozen second head; one concatenated forward and backward.
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        struct State {
            BasicNetwork<D> head;
            DTensor zs, zt, ys, other, x;
        };
        auto s = std::make_shared<State>();
        s->head = build_task_classifier(seed).cast<D>();
        s->zs = random_tensor({4, 20}, rng);
        s->zt = random_tensor({3, 20}, rng);
        s->ys = DTensor({4, 1}, std::vector<D>{0, 1, 1, 0});
        s->other = random_probs({3, 1}, rng);
        s->x = DTensor::concat_rows(s->zs, s->zt);
        GradCheckProblem<D> p;
        auto value = [s](DTensor* grad) {
            const DTensor out = s->head.forward(s->x, Mode::train);
            const DTensor ps = out.slice_rows(0, 4), pt = out.slice_rows(4, 7);
            DTensor gs, gt;
            const LossValue task = bce(ps, s->ys, grad ? &gs : nullptr);
            const LossValue dis = discrepancy_loss(pt, s->other, DiscrepancyMetric::symmetric_bce,
                                                   grad ? &gt : nullptr, static_cast<DTensor*>(nullptr));
            if (grad)
                *grad = DTensor::concat_rows(gs, gt);
            return classifier_losses_phase3(task, task, dis).first.value;
        };
        p.loss = [value] { return DTensor({1}, std::vector<D>{value(nullptr)}); };
        p.backward = [s, value] {
            DTensor g;
            value(&g);
            s->head.zero_grad();
            s->head.backward(g);
        };
        p.activation_pattern = [s] { return s->head.activation_pattern(); };
        p.backward();
        for (auto* t : s->head.trainable())
            p.buffers.push_back({"head", &t->data(), &t->grad()});
        const GradCheckReport r = grad_check(p);
        INFO("seed " << seed << " err " << r.max_relative_error);
        CHECK(r.passed());
    }
}
