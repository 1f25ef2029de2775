#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "mpda/augment.hpp"
#include "mpda/dataset.hpp"
#include "mpda/image.hpp"
#include "mpda/io.hpp"
#include "mpda/random.hpp"

using namespace mpda;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "mpda_test_data" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Image random_image(std::size_t side, Rng& rng)
{
    Image im(side, side);
    for (auto& v : im.pixels)
        v = static_cast<float>(rng.uniform());
    return im;
}

Image disk(std::size_t side, double diameter)
{
    Image im(side, side);
    const double c = (static_cast<double>(side) - 1) / 2, r = diameter / 2;
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
            if ((y - c) * (y - c) + (x - c) * (x - c) <= r * r)
                im.at(y, x) = 1.0f;
    return im;
}

std::size_t thresholded_width(const Image& im, float level = 0.5f)
{
    std::size_t best = 0;
    for (std::size_t y = 0; y < im.height; ++y) {
        std::size_t row = 0;
        for (std::size_t x = 0; x < im.width; ++x)
            row += im.at(y, x) > level;
        best = std::max(best, row);
    }
    return best;
}

LabeledDataset labeled(std::size_t normals, std::size_t abnormals, std::uint64_t seed = 1)
{
    Rng rng(seed);
    LabeledDataset ds;
    for (std::size_t i = 0; i < normals + abnormals; ++i) {
        ds.images.push_back(random_image(80, rng));
        ds.labels.push_back(i < normals ? kNormal : kAbnormal);
        ds.ids.push_back("ex" + std::to_string(i));
    }
    return ds;
}

// Tight bounding box of nonzero pixels: {y0, x0, y1, x1} half-open.
std::array<std::size_t, 4> support(const Image& im)
{
    std::array<std::size_t, 4> box{im.height, im.width, 0, 0};
    for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x)
            if (im.at(y, x) != 0.0f) {
                box[0] = std::min(box[0], y);
                box[1] = std::min(box[1], x);
                box[2] = std::max(box[2], y + 1);
                box[3] = std::max(box[3], x + 1);
            }
    return box;
}

const unsigned char kRgbPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00,
    0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0xfd, 0xd4, 0x9a, 0x73, 0x00, 0x00, 0x00, 0x10, 0x49,
    0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x10, 0x50, 0x30, 0x00, 0x22, 0x06, 0x08, 0x05, 0x00, 0x0a, 0x0e, 0x01, 0x81,
    0x56, 0x33, 0xee, 0xf3, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

// 2x2 gray: 0 255 / 0 255
const unsigned char kGrayPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00, 0x00,
    0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x00, 0x00, 0x00, 0x00, 0x57, 0xdd, 0x52, 0xf8, 0x00, 0x00, 0x00, 0x0e, 0x49,
    0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0xf8, 0xcf, 0xc0, 0xf0, 0x1f, 0x00, 0x05, 0x01, 0x01, 0xff, 0x5d, 0x69,
    0x35, 0xd9, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

template <std::size_t N>
std::string bytes(const unsigned char (&a)[N])
{
    return std::string(reinterpret_cast<const char*>(a), N);
}

}  // namespace

TEST_CASE("image decoding")
{
    const Image g = decode_png(bytes(kGrayPng), "gray.png");
    REQUIRE(g.height == 2);
    CHECK(g.at(0, 0) == 0.0f);
    CHECK(g.at(0, 1) == 1.0f);
    try {
        decode_png(bytes(kRgbPng), "color.png");
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(std::string(e.what()).find("grayscale required") != std::string::npos);
        CHECK(std::string(e.what()).find("color.png") != std::string::npos);
    }
    CHECK_THROWS_AS(decode_pgm("P6\n2 2\n255\n123456789012", "c.ppm"), IngestionError);
    CHECK_THROWS_AS(decode_pgm("P5\n2 2\n255\n12", "short.pgm"), IngestionError);

    Image im(3, 2);
    im.at(0, 0) = 1.0f;
    im.at(2, 1) = 0.5f;
    const Image back = decode_pgm(encode_pgm(im), "rt.pgm");
    CHECK(back.at(0, 0) == 1.0f);
    CHECK(back.at(2, 1) == doctest::Approx(128.0 / 255.0));
    CHECK(decode_pgm("P2\n2 1\n255\n0 255\n", "ascii.pgm").at(0, 1) == 1.0f);
}

TEST_CASE("load_image_dir orders files and labels")
{
    const fs::path root = fresh_dir("tree");
    const fs::path train = root / "train";
    fs::create_directories(train / "normal");
    fs::create_directories(train / "abnormal");
    for (const char* n : {"c.pgm", "a.pgm", "b.pgm"})
        write_pgm(Image(4, 4, 1.0f), train / "normal" / n);
    for (const char* n : {"z.pgm", "y.pgm"})
        write_pgm(Image(4, 4, 0.0f), train / "abnormal" / n);

    const auto ds = std::get<LabeledDataset>(load_image_dir(root, Domain::source, Split::train));
    CHECK(ds.labels == std::vector<std::uint8_t>{0, 0, 0, 1, 1});
    CHECK(ds.ids == std::vector<std::string>{"normal/a.pgm", "normal/b.pgm", "normal/c.pgm", "abnormal/y.pgm",
                                             "abnormal/z.pgm"});
    CHECK(ds.images[0].at(0, 0) == 1.0f);
    CHECK(ds.images[4].at(0, 0) == 0.0f);

    fs::create_directories(root / "test" / "normal");
    fs::create_directories(root / "test" / "abnormal");
    write_pgm(Image(4, 4), root / "test" / "normal" / "only.pgm");
    CHECK(std::get<LabeledDataset>(load_image_dir(root, Domain::source, Split::test)).size() == 1);

    fs::create_directories(root / "validation" / "unlabeled");
    write_pgm(Image(4, 4), root / "validation" / "unlabeled" / "u.pgm");
    CHECK(std::holds_alternative<UnlabeledDataset>(load_image_dir(root, Domain::target, Split::validation)));

    io::write_file(train / "normal" / "d.png", bytes(kRgbPng));
    CHECK_THROWS_AS(load_image_dir(root, Domain::source, Split::train), IngestionError);
}

TEST_CASE("prepare examples")
{
    const Image out = prepare_image(Image(160, 160, 0.37f), 80, {});
    REQUIRE(out.height == 80);
    REQUIRE(out.width == 80);
    for (float v : out.pixels)
        CHECK(v == doctest::Approx(0.37f));

    Image hot(9, 9);
    hot.at(4, 4) = 1.0f;
    for (float v : median3(hot).pixels)
        CHECK(v == 0.0f);

    const Image shrunk = prepare_image(disk(120, 30), 80, {});
    const std::size_t w = thresholded_width(shrunk);
    CHECK(w >= 19);
    CHECK(w <= 21);

    CHECK_THROWS_AS(prepare_image(Image(100, 120), 80, {}), PreparationError);
    Image bright(160, 160, 1.0f);
    for (float v : prepare_image(bright, 80, DenoiseMethod::parse("median3")).pixels)
        REQUIRE(v <= 1.0f);

    CHECK(DenoiseMethod::parse("none").kind == DenoiseMethod::Kind::none);
    const DenoiseMethod t = DenoiseMethod::parse("threshold(0.2)");
    CHECK(t.kind == DenoiseMethod::Kind::threshold);
    CHECK(t.threshold == doctest::Approx(0.2f));
    CHECK(DenoiseMethod::parse(t.str()).threshold == t.threshold);
    CHECK_THROWS_AS(DenoiseMethod::parse("gauss"), PreparationError);
    CHECK(threshold_floor(Image(2, 2, 0.1f), 0.2f).pixels == std::vector<float>(4, 0.0f));
}

TEST_CASE("zoom range examples")
{
    const auto [lo, hi] = zoom_range(8, 25, 0);
    CHECK(lo == 0.32);
    CHECK(hi == 0.32);
    const auto [a, b] = zoom_range(10, 10, 0.1);
    CHECK(a == doctest::Approx(0.9));
    CHECK(b == doctest::Approx(1.1));
    const auto [c, d] = zoom_range(8, 25, 0.0625);
    CHECK(c == doctest::Approx(0.3));
    CHECK(d == doctest::Approx(0.34));
    CHECK_THROWS_AS(zoom_range(0, 25, 0), ContractError);
    CHECK_THROWS_AS(zoom_range(8, 25, 1.0), ContractError);
}

TEST_CASE("augment_zoom support")
{
    const Image ones(80, 80, 1.0f);
    CHECK(augment_zoom(ones, 1.0) == ones);
    Rng rng(2);
    const Image r = random_image(80, rng);
    CHECK(augment_zoom(r, 1.0) == r);

    const auto half = support(augment_zoom(ones, 0.5));
    CHECK(half == std::array<std::size_t, 4>{20, 20, 60, 60});
    const auto small = support(augment_zoom(ones, 0.3));
    CHECK(small == std::array<std::size_t, 4>{28, 28, 52, 52});
    // 80 * 0.3125 = 25: odd remainder of 55 goes right/bottom
    const auto odd = support(augment_zoom(ones, 0.3125));
    CHECK(odd == std::array<std::size_t, 4>{27, 27, 52, 52});

    CHECK_THROWS_AS(augment_zoom(ones, 0.0), ContractError);
    CHECK_THROWS_AS(augment_zoom(ones, -0.2), ContractError);
    CHECK_THROWS_AS(augment_zoom(ones, 1.2), ContractError);
}

TEST_CASE("blur and dihedral")
{
    for (float v : augment_blur(Image(80, 80, 0.6f), 1.3).pixels)
        CHECK(v == doctest::Approx(0.6f));
    Rng rng(8);
    const Image im = random_image(80, rng);
    Image r = im;
    for (int k = 0; k < 4; ++k)
        r = augment_dihedral(r, 1);
    CHECK(r == im);
    CHECK(augment_dihedral(im, 0) == im);
    CHECK(augment_dihedral(augment_dihedral(im, 4), 4) == im);
    auto sorted = im.pixels;
    std::sort(sorted.begin(), sorted.end());
    std::set<std::vector<float>> distinct;
    for (int e = 0; e < 8; ++e) {
        const Image t = augment_dihedral(im, e);
        auto s = t.pixels;
        std::sort(s.begin(), s.end());
        CHECK(s == sorted);
        distinct.insert(t.pixels);
    }
    CHECK(distinct.size() == 8);
    CHECK_THROWS_AS(augment_dihedral(im, 8), ContractError);

    // quarter turn counter-clockwise moves the top-right corner to top-left
    Image corner(4, 4);
    corner.at(0, 3) = 1.0f;
    CHECK(augment_dihedral(corner, 1).at(0, 0) == 1.0f);
}

TEST_CASE("augment_dataset counts, labels and determinism")
{
    const LabeledDataset ds = labeled(3, 2);
    AugmentationConfig cfg;
    cfg.copies = 4;
    cfg.seed = 17;
    const LabeledDataset out = augment_dataset(ds, cfg);
    REQUIRE(out.size() == 20);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(out.labels[k * 5 + i] == ds.labels[i]);
    const LabeledDataset again = augment_dataset(ds, cfg);
    CHECK(again.images == out.images);
    CHECK(again.ids == out.ids);
    cfg.seed = 18;
    CHECK(augment_dataset(ds, cfg).images != out.images);

    cfg.copies = 10;
    CHECK(augment_dataset(labeled(50, 50), cfg).size() == 1000);
    cfg.append_originals = true;
    CHECK(augment_dataset(ds, cfg).size() == 55);

    LabeledDataset wrong = ds;
    wrong.images[0] = Image(120, 120);
    CHECK_THROWS_AS(augment_dataset(wrong, cfg), ContractError);
    cfg.copies = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("augmentation property trials")
{
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const Image im = random_image(80, rng);
        const double ratio = rng.uniform(0.05, 1.0);
        const Image z = augment_zoom(im, ratio);
        REQUIRE(z.height == 80);
        REQUIRE(z.width == 80);
        const auto box = support(z);
        const std::size_t side = static_cast<std::size_t>(std::lround(80 * ratio));
        CHECK(box[2] - box[0] <= side);
        CHECK(box[3] - box[1] <= side);
        const Image b = augment_blur(z, rng.uniform(0.5, 1.5));
        for (float v : b.pixels)
            REQUIRE((v >= 0.0f && v <= 1.0f));
    }
}

TEST_CASE("balance_downsample")
{
    const LabeledDataset ds = labeled(10, 4);
    const LabeledDataset b = balance_downsample(ds, 5);
    CHECK(b.count(kNormal) == 4);
    CHECK(b.count(kAbnormal) == 4);
    std::vector<std::string> abnormal_ids;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b.labels[i] == kAbnormal)
            abnormal_ids.push_back(b.ids[i]);
    CHECK(abnormal_ids == std::vector<std::string>{"ex10", "ex11", "ex12", "ex13"});
    // survivors keep their relative order
    CHECK(std::is_sorted(b.ids.begin(), b.ids.begin() + 4,
                         [](const std::string& a, const std::string& c) { return std::stoi(a.substr(2)) < std::stoi(c.substr(2)); }));
    CHECK(balance_downsample(ds, 5).ids == b.ids);

    const LabeledDataset even = labeled(3, 3);
    CHECK(balance_downsample(even, 1).ids == even.ids);
    CHECK_THROWS_AS(balance_downsample(labeled(3, 0), 1), BalanceError);
}

TEST_CASE("batch plans")
{
    const BatchPlan plan(10, 4, 7);
    const auto batches = plan.epoch(0);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].source.size() == 4);
    CHECK(batches[1].source.size() == 4);
    CHECK(batches[2].source.size() == 2);
    std::set<std::size_t> seen;
    for (const auto& b : batches)
        seen.insert(b.source.begin(), b.source.end());
    CHECK(seen.size() == 10);
    CHECK(BatchPlan(9, 4, 7).epoch(0).size() == 2);

    const BatchPlan again(10, 4, 7);
    CHECK(again.epoch(3)[0].source == plan.epoch(3)[0].source);
    CHECK(plan.epoch(0)[0].source != plan.epoch(1)[0].source);

    const BatchPlan paired(100, 30, 10, 3);
    CHECK(paired.pairing() == Pairing::source_target);
    std::map<std::size_t, int> hits;
    for (const auto& b : paired.epoch(0)) {
        CHECK(b.target.size() == b.source.size());
        for (auto t : b.target)
            ++hits[t];
    }
    REQUIRE(hits.size() == 30);
    for (const auto& [idx, n] : hits)
        CHECK(n >= 3);

    CHECK_THROWS_AS(BatchPlan(0, 4, 1), ContractError);
    CHECK_THROWS_AS(BatchPlan(10, 1, 1), ContractError);
    CHECK_THROWS_AS(BatchPlan(10, 0, 4, 1), ContractError);
}

TEST_CASE("dataset containers and sealing")
{
    LabeledDataset ds = labeled(2, 2);
    ds.domain = Domain::target;
    ds.split = Split::test;
    const auto decoded = std::get<LabeledDataset>(decode_dataset(encode_dataset(ds)));
    CHECK(decoded.images == ds.images);
    CHECK(decoded.labels == ds.labels);
    CHECK(decoded.ids == ds.ids);
    CHECK(decoded.domain == Domain::target);
    CHECK(decoded.split == Split::test);

    auto [unlabeled, sealed] = seal(ds);
    CHECK(unlabeled.ids == ds.ids);
    CHECK(sealed.labels == ds.labels);
    const auto u2 = std::get<UnlabeledDataset>(decode_dataset(encode_dataset(unlabeled)));
    CHECK(u2.images == ds.images);
    CHECK(unseal(u2, decode_sealed(encode_sealed(sealed))).labels == ds.labels);

    SealedLabels wrong = sealed;
    std::swap(wrong.ids[0], wrong.ids[1]);
    CHECK_THROWS_AS(unseal(u2, wrong), ContractError);

    std::string bad = encode_dataset(ds);
    bad[0] = 'Q';
    CHECK_THROWS_AS(decode_dataset(bad), io::FormatError);
    CHECK_THROWS_AS(decode_dataset(encode_dataset(ds) + "x"), io::FormatError);

    const fs::path dir = fresh_dir("containers");
    save_dataset(ds, dir / "l.mpds");
    save_dataset(unlabeled, dir / "u.mpds");
    CHECK(load_labeled(dir / "l.mpds").labels == ds.labels);
    CHECK_THROWS_AS(load_labeled(dir / "u.mpds"), ContractError);
    CHECK_THROWS_AS(load_unlabeled(dir / "l.mpds"), ContractError);
}

TEST_CASE("dataset validation and stacking")
{
    LabeledDataset ds = labeled(2, 1);
    CHECK_NOTHROW(ds.validate(80));
    CHECK_THROWS_AS(ds.validate(64), ContractError);
    ds.labels[0] = 3;
    CHECK_THROWS_AS(ds.validate(), ContractError);
    ds.labels[0] = 0;
    ds.images[1].pixels[5] = 1.5f;
    CHECK_THROWS_AS(ds.validate(80), ContractError);

    const LabeledDataset ok = labeled(2, 2);
    const Tensor x = stack_images(ok.images, {3, 1});
    CHECK(x.shape() == Shape{2, 1, 80, 80});
    CHECK(x[0] == ok.images[3].pixels[0]);
    CHECK(x[80 * 80] == ok.images[1].pixels[0]);
    const Tensor y = stack_labels(ok.labels, {3, 0});
    CHECK(y.shape() == Shape{2, 1});
    CHECK(y[0] == 1.0f);
    CHECK(y[1] == 0.0f);
    CHECK_THROWS_AS(stack_images({Image(80, 80), Image(40, 40)}), DimensionError);
}

TEST_CASE("name parsing")
{
    CHECK(parse_domain("target") == Domain::target);
    CHECK(parse_split("validation") == Split::validation);
    CHECK(std::string(split_name(Split::test)) == "test");
    CHECK_THROWS_AS(parse_domain("both"), ContractError);
    CHECK_THROWS_AS(parse_split("dev"), ContractError);
}
