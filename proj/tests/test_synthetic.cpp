#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mpda/io.hpp"
#include "mpda/synthetic.hpp"

using namespace mpda;
namespace fs = std::filesystem;

namespace {

SyntheticDomainSpec clean_spec()
{
    SyntheticDomainSpec s;
    s.noise_sigma = 0.0;
    s.flare_probability = 0.0;
    return s;
}

// Pixels that are >= all 8 neighbours and above `floor`, merged when adjacent.
int local_maxima(const Image& im, float floor)
{
    std::vector<int> mark(im.pixels.size(), 0);
    for (std::size_t y = 1; y + 1 < im.height; ++y)
        for (std::size_t x = 1; x + 1 < im.width; ++x) {
            const float v = im.at(y, x);
            if (v <= floor)
                continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (im.at(y + dy, x + dx) > v) {
                        peak = false;
                        break;
                    }
            mark[y * im.width + x] = peak;
        }
    // count connected plateaus of marked pixels
    int count = 0;
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < mark.size(); ++i) {
        if (mark[i] != 1)
            continue;
        ++count;
        stack.push_back(i);
        mark[i] = 2;
        while (!stack.empty()) {
            const std::size_t j = stack.back();
            stack.pop_back();
            const std::size_t y = j / im.width, x = j % im.width;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::size_t k = (y + dy) * im.width + (x + dx);
                    if (k < mark.size() && mark[k] == 1) {
                        mark[k] = 2;
                        stack.push_back(k);
                    }
                }
        }
    }
    return count;
}

}  // namespace

TEST_CASE("renders are deterministic, 80x80 and in range")
{
    const SyntheticDomainSpec s;
    for (auto cls : {MeltPoolClass::normal, MeltPoolClass::abnormal}) {
        const Image a = render_melt_pool(s, cls, 42), b = render_melt_pool(s, cls, 42);
        CHECK(a == b);
        CHECK(a.height == 80);
        CHECK(a.width == 80);
        for (float v : a.pixels)
            REQUIRE((v >= 0.0f && v <= 1.0f));
        CHECK(render_melt_pool(s, cls, 43) != a);
    }
}

TEST_CASE("noiseless normal pool is unimodal with its maximum at the center")
{
    const SyntheticDomainSpec s = clean_spec();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RenderInfo info;
        const Image im = render_melt_pool(s, MeltPoolClass::normal, seed, &info);
        CHECK(info.spatter_count == 0);
        CHECK_FALSE(info.eccentric);
        CHECK_FALSE(info.dropout);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < im.pixels.size(); ++i)
            if (im.pixels[i] > im.pixels[arg])
                arg = i;
        const double y = static_cast<double>(arg / 80), x = static_cast<double>(arg % 80);
        INFO("seed " << seed << " argmax " << y << "," << x << " center " << info.center_y << "," << info.center_x);
        CHECK(std::abs(y - info.center_y) <= 1.0);
        CHECK(std::abs(x - info.center_x) <= 1.0);
        CHECK(local_maxima(im, static_cast<float>(s.background) + 0.02f) == 1);
    }
}

TEST_CASE("three spatter dots give at least three local maxima")
{
    SyntheticDomainSpec s = clean_spec();
    s.spatter_probability = 1.0;
    s.spatter_min = 3;
    s.spatter_max = 3;
    s.eccentricity_probability = 0.0;
    s.dropout_probability = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RenderInfo info;
        const Image im = render_melt_pool(s, MeltPoolClass::abnormal, seed, &info);
        CHECK(info.spatter_count == 3);
        INFO("seed " << seed);
        CHECK(local_maxima(im, static_cast<float>(s.background) + 0.05f) >= 3);
    }
}

TEST_CASE("abnormal renders always carry an abnormality")
{
    SyntheticDomainSpec s = clean_spec();
    s.spatter_probability = 0.05;
    s.eccentricity_probability = 0.05;
    s.dropout_probability = 0.05;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        RenderInfo info;
        render_melt_pool(s, MeltPoolClass::abnormal, seed, &info);
        CHECK((info.spatter_count > 0 || info.eccentric || info.dropout));
    }
}

TEST_CASE("spec validation")
{
    SyntheticDomainSpec s;
    CHECK_NOTHROW(s.validate());
    s.diameter_mean = 80;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.diameter_mean = 5;
    s.diameter_spread = 2;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("reference counts")
{
    SyntheticBenchmarkSpec spec;
    apply_reference_counts(spec);
    CHECK(spec.source.train_normal == 323);
    CHECK(spec.source.train_abnormal == 323);
    CHECK(spec.target.train_normal + spec.target.train_abnormal == kReferenceTargetTrain);
    CHECK(spec.source.validation_per_class == 50);
    CHECK(spec.target.test_per_class == 50);

    const SyntheticBenchmark b = generate_domain_pair(spec.source, spec.target, true);
    CHECK(b.source_train.size() == 646);
    CHECK(b.source_train.count(kNormal) == 323);
    CHECK(b.target_train.size() == 5819);
    CHECK(b.target_train_answers.labels.size() == 5819);
    CHECK(b.target_train_answers.ids == b.target_train.ids);
    for (const LabeledDataset* ds : {&b.source_validation, &b.source_test, &b.target_validation, &b.target_test}) {
        CHECK(ds->count(kNormal) == 50);
        CHECK(ds->count(kAbnormal) == 50);
        CHECK_NOTHROW(ds->validate(80));
    }
    CHECK(b.source_train.domain == Domain::source);
    CHECK(b.target_test.domain == Domain::target);
    CHECK(b.target_test.split == Split::test);
}

TEST_CASE("generation digest is a pure function of the spec")
{
    SyntheticDomainSpec src, tgt;
    for (auto* s : {&src, &tgt}) {
        s->train_normal = 6;
        s->train_abnormal = 4;
        s->validation_per_class = 3;
        s->test_per_class = 2;
    }
    tgt.pixel_size = 25;
    tgt.diameter_mean = 9;
    tgt.diameter_spread = 1;
    tgt.seed = 5;
    auto digest = [](const SyntheticBenchmark& b) {
        return io::digest_hex(encode_dataset(b.source_train) + encode_dataset(b.target_train) +
                              encode_dataset(b.target_test) + encode_sealed(b.target_train_answers));
    };
    const SyntheticBenchmark a = generate_domain_pair(src, tgt, false);
    CHECK(digest(a) == digest(generate_domain_pair(src, tgt, false)));
    CHECK(a.source_train.count(kNormal) == 6);
    CHECK(a.source_train.count(kAbnormal) == 4);
    CHECK(a.target_train.size() == 10);
    tgt.seed = 6;
    CHECK(digest(a) != digest(generate_domain_pair(src, tgt, false)));

    // identical specs: the no-shift benchmark
    const SyntheticBenchmark same = generate_domain_pair(src, src, false);
    CHECK(same.target_train.size() == same.source_train.size());

    const fs::path out = fs::temp_directory_path() / "mpda_test_synthetic";
    fs::remove_all(out);
    write_benchmark(a, out.string());
    CHECK(fs::exists(out / "source.train.mpds"));
    CHECK(fs::exists(out / "target.train.mpds"));
    CHECK(fs::exists(out / "target.train.sealed"));
    CHECK(std::holds_alternative<UnlabeledDataset>(load_dataset(out / "target.train.mpds")));
    CHECK(load_sealed(out / "target.train.sealed").labels == a.target_train_answers.labels);
    CHECK(fs::is_directory(out / "source" / "train" / "normal"));
    CHECK(fs::is_directory(out / "target" / "train" / "unlabeled"));
}
