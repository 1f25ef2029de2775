#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mpda/checkpoint.hpp"
#include "mpda/io.hpp"
#include "mpda/networks.hpp"
#include "mpda/random.hpp"

using namespace mpda;

namespace {

std::size_t count_trainable(const Network& net)
{
    std::size_t total = 0;
    for (const Tensor* t : net.trainable())
        total += t->numel();
    return total;
}

Tensor random_images(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Tensor x({n, 1, kImageSide, kImageSide});
    for (auto& v : x.data())
        v = static_cast<float>(rng.uniform());
    return x;
}

// Forward + backward with d(sum y)/dy = 1 so every parameter gets a gradient.
void populate_grads(Network& net, const Tensor& x)
{
    const Tensor y = net.forward(x, Mode::train);
    net.backward(Tensor(y.shape(), 1.0f));
}

std::filesystem::path temp_path(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "mpda_test_networks";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("parameter counts follow the layer tables")
{
    // conv: C_out*C_in*9 + C_out; BN: 2*C; linear: out*in + out
    const std::size_t encoder = (16 * 1 * 9 + 16) + 2 * 16 + (32 * 16 * 9 + 32) + 2 * 32 + (32 * 32 * 9 + 32) +
                                2 * 32 + (3200 * 20 + 20) + 2 * 20;
    const std::size_t task = (20 * 32 + 32) + (32 + 1);
    const std::size_t deep = (20 * 64 + 64) + 2 * (64 * 64 + 64) + (64 + 1);
    const std::size_t shallow = (20 * 64 + 64) + (64 + 1);
    CHECK(encoder == 78268);
    CHECK(task == 705);
    CHECK(deep == 9729);

    CHECK(encoder_spec().trainable_count() == encoder);
    CHECK(task_classifier_spec().trainable_count() == task);
    CHECK(domain_classifier_spec(DomainHead::deep).trainable_count() == deep);
    CHECK(domain_classifier_spec(DomainHead::shallow).trainable_count() == shallow);
    CHECK(count_trainable(build_encoder(1)) == encoder);
    CHECK(count_trainable(build_task_classifier(1)) == task);
    CHECK(count_trainable(build_domain_classifier(1)) == deep);
}

TEST_CASE("encoder shapes")
{
    Network enc = build_encoder(3);
    const Tensor y = enc.forward(random_images(2, 1), Mode::train);
    CHECK(y.shape() == Shape{2, 20});

    const auto shapes = encoder_spec().chain_shapes();
    bool saw_flatten_input = false;
    const auto& layers = encoder_spec().layers;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::flatten) {
            REQUIRE(i > 0);
            CHECK(shapes[i - 1] == Shape{32, 10, 10});
            CHECK(enc.activation(i - 1).shape() == Shape{2, 32, 10, 10});
            CHECK(shapes[i] == Shape{3200});
            saw_flatten_input = true;
        }
    CHECK(saw_flatten_input);
    CHECK(shapes.back() == Shape{20});

    CHECK_THROWS_AS(enc.forward(Tensor({2, 1, 64, 64}), Mode::train), DimensionError);
    CHECK_THROWS_AS(enc.forward(Tensor({2, 3, 80, 80}), Mode::train), DimensionError);
}

TEST_CASE("classifier outputs are probabilities")
{
    Rng rng(5);
    Tensor z({2, 20});
    for (auto& v : z.data())
        v = static_cast<float>(rng.normal());
    for (Network net : {build_task_classifier(1), build_domain_classifier(1, DomainHead::deep),
                        build_domain_classifier(1, DomainHead::shallow)}) {
        const Tensor p = net.forward(z, Mode::eval);
        CHECK(p.shape() == Shape{2, 1});
        for (float v : p.data()) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
    Network task = build_task_classifier(1);
    CHECK_THROWS_AS(task.forward(Tensor({2, 21}), Mode::eval), DimensionError);
}

TEST_CASE("initialization is seeded, bounded by fan-in, and BN starts at identity")
{
    const Network a = build_encoder(11), b = build_encoder(11), c = build_encoder(12);
    bool differ = false;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        CHECK(a.params()[i].weights.data() == b.params()[i].weights.data());
        differ = differ || a.params()[i].weights.data() != c.params()[i].weights.data();
    }
    CHECK(differ);

    for (const auto& p : a.params()) {
        if (p.has_running_stats()) {
            for (float g : p.weights.data())
                CHECK(g == 1.0f);
            for (float s : p.bias.data())
                CHECK(s == 0.0f);
            continue;
        }
        const std::size_t fan_in = p.weights.numel() / p.weights.size(0);
        const float bound = static_cast<float>(std::sqrt(1.0 / static_cast<double>(fan_in)));
        for (float w : p.weights.data())
            REQUIRE(std::abs(w) <= bound);
        for (float w : p.bias.data())
            REQUIRE(std::abs(w) <= bound);
    }
}

TEST_CASE("forward determinism and finiteness")
{
    Network enc = build_encoder(2);
    const Tensor x = random_images(3, 9);
    enc.forward(x, Mode::train);  // move running stats away from the init
    const Tensor a = enc.forward(x, Mode::eval);
    const Tensor b = enc.forward(x, Mode::eval);
    CHECK(a.data() == b.data());
    Network fresh = build_encoder(2);
    CHECK(fresh.forward(Tensor({2, 1, 80, 80}), Mode::train).all_finite());
    CHECK(fresh.forward(Tensor({2, 1, 80, 80}), Mode::eval).all_finite());
}

TEST_CASE("adam examples")
{
    SUBCASE("first step has magnitude lr")
    {
        Network net = build_task_classifier(4);
        populate_grads(net, Tensor({4, 20}, 0.3f));
        for (Tensor* t : net.trainable())
            std::fill(t->grad().begin(), t->grad().end(), 1.0f);
        net.params()[0].weights[0] = 1.0f;
        net.adam_step(0.1);
        // m_hat = v_hat = 1 -> step = lr * 1 / (1 + eps)
        CHECK(net.params()[0].weights[0] == doctest::Approx(0.9).epsilon(1e-6));
        CHECK(net.adam_steps() == 1);
        for (const Tensor* t : net.trainable())
            for (float g : t->grad())
                REQUIRE(g == 0.0f);
    }
    SUBCASE("zero gradient leaves parameters unchanged and decays moments")
    {
        Network net = build_task_classifier(4);
        populate_grads(net, Tensor({4, 20}, 0.3f));
        net.adam_step(0.01);
        const auto before = net.params()[0].weights.data();
        const float m_before = net.adam_moments()[0].m[0];
        populate_grads(net, Tensor({4, 20}, 0.3f));
        for (Tensor* t : net.trainable())
            std::fill(t->grad().begin(), t->grad().end(), 0.0f);
        net.adam_step(0.0);
        CHECK(net.params()[0].weights.data() == before);
        CHECK(std::abs(net.adam_moments()[0].m[0]) == doctest::Approx(std::abs(0.9f * m_before)));
    }
    SUBCASE("equal gradients give equal updates")
    {
        Network net = build_task_classifier(4);
        populate_grads(net, Tensor({4, 20}, 0.3f));
        auto& w = net.params()[0].weights;
        w[0] = 0.25f;
        w[1] = 0.25f;
        w.grad()[0] = 0.7f;
        w.grad()[1] = 0.7f;
        net.adam_step(0.05);
        CHECK(w[0] == w[1]);
    }
    SUBCASE("lr 0 never changes parameters")
    {
        Network net = build_encoder(4);
        const Network before = net;
        for (int k = 0; k < 3; ++k) {
            populate_grads(net, random_images(2, static_cast<std::uint64_t>(k)));
            net.adam_step(0.0);
        }
        const auto a = net.trainable();
        const auto b = before.trainable();
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i]->data() == b[i]->data());
    }
    SUBCASE("missing gradients")
    {
        Network net = build_task_classifier(4);
        CHECK_THROWS_AS(net.adam_step(0.1), ContractError);
        populate_grads(net, Tensor({4, 20}, 0.3f));
        net.adam_step(0.1);
        CHECK_THROWS_AS(adam_step(net, 0.1), ContractError);
    }
}

TEST_CASE("checkpoint round trip")
{
    ModelSet models = ModelSet::build(21, DomainHead::deep);
    populate_grads(models.encoder, random_images(2, 3));
    models.encoder.adam_step(1e-3);
    models.encoder.forward(random_images(2, 4), Mode::train);
    const CheckpointMeta meta{"domain-align", 48, 21, "abc123"};
    const auto path = temp_path("round.ckpt");
    save_checkpoint(models, meta, DomainHead::deep, path);
    const LoadedCheckpoint loaded = load_checkpoint(path);

    CHECK(loaded.meta.phase == "domain-align");
    CHECK(loaded.meta.epoch == 48);
    CHECK(loaded.meta.seed == 21);
    CHECK(loaded.meta.config_digest == "abc123");
    CHECK(loaded.head == DomainHead::deep);
    const auto a = models.all();
    const auto b = loaded.models.all();
    for (std::size_t n = 0; n < a.size(); ++n) {
        CHECK(a[n]->adam_steps() == b[n]->adam_steps());
        for (std::size_t i = 0; i < a[n]->params().size(); ++i) {
            const auto& pa = a[n]->params()[i];
            const auto& pb = b[n]->params()[i];
            CHECK(pa.weights.data() == pb.weights.data());
            CHECK(pa.bias.data() == pb.bias.data());
            CHECK(pa.running_mean.data() == pb.running_mean.data());
            CHECK(pa.running_var.data() == pb.running_var.data());
        }
        for (std::size_t i = 0; i < a[n]->adam_moments().size(); ++i) {
            CHECK(a[n]->adam_moments()[i].m == b[n]->adam_moments()[i].m);
            CHECK(a[n]->adam_moments()[i].v == b[n]->adam_moments()[i].v);
        }
    }
    // re-encoding the loaded models reproduces the file byte for byte
    CHECK(encode_checkpoint(loaded.models, loaded.meta, loaded.head) == encode_checkpoint(models, meta, DomainHead::deep));

    std::size_t trainable = 0;
    for (const auto& e : loaded.manifest)
        if (is_trainable_entry(e.name))
            trainable += shape_numel(e.shape);
    CHECK(trainable == 78268 + 2 * 705 + 9729);
}

TEST_CASE("checkpoint load errors are distinct")
{
    const ModelSet models = ModelSet::build(2, DomainHead::shallow);
    const std::string good = encode_checkpoint(models, {"pretrain", 1, 2, "d"}, DomainHead::shallow);
    CHECK_NOTHROW(decode_checkpoint(good));
    CHECK(decode_checkpoint(good).head == DomainHead::shallow);

    std::string bad_version = good;
    bad_version[8] = static_cast<char>(bad_version[8] ^ 0x5a);
    CHECK_THROWS_AS(decode_checkpoint(bad_version), CheckpointVersionError);

    CHECK_THROWS_AS(decode_checkpoint(good.substr(0, good.size() - 7)), CheckpointTruncatedError);
    CHECK_THROWS_AS(decode_checkpoint(good.substr(0, 20)), CheckpointTruncatedError);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad_magic), CheckpointError);

    // trailing bytes beyond the declared payload
    CHECK_THROWS_AS(decode_checkpoint(good + std::string(8, '\0')), CheckpointManifestError);

    CHECK_THROWS_AS(load_checkpoint(temp_path("does-not-exist.ckpt")), io::IoError);
}
