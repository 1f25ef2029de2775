#include "mpda/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <variant>

#include "mpda/random.hpp"

namespace mpda {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr std::size_t kSide = 80;

struct RealField {
    const char* key;
    double SyntheticDomainSpec::*member;
};
struct CountField {
    const char* key;
    std::size_t SyntheticDomainSpec::*member;
};
struct IntField {
    const char* key;
    int SyntheticDomainSpec::*member;
};

const RealField kRealFields[] = {
    {"pixel_size", &SyntheticDomainSpec::pixel_size},
    {"diameter_mean", &SyntheticDomainSpec::diameter_mean},
    {"diameter_spread", &SyntheticDomainSpec::diameter_spread},
    {"elongation_max", &SyntheticDomainSpec::elongation_max},
    {"center_jitter", &SyntheticDomainSpec::center_jitter},
    {"tail_length", &SyntheticDomainSpec::tail_length},
    {"tail_intensity", &SyntheticDomainSpec::tail_intensity},
    {"tail_decay", &SyntheticDomainSpec::tail_decay},
    {"peak_intensity", &SyntheticDomainSpec::peak_intensity},
    {"brightness_gain", &SyntheticDomainSpec::brightness_gain},
    {"background", &SyntheticDomainSpec::background},
    {"noise_sigma", &SyntheticDomainSpec::noise_sigma},
    {"flare_probability", &SyntheticDomainSpec::flare_probability},
    {"flare_intensity", &SyntheticDomainSpec::flare_intensity},
    {"spatter_probability", &SyntheticDomainSpec::spatter_probability},
    {"spatter_radius", &SyntheticDomainSpec::spatter_radius},
    {"spatter_intensity", &SyntheticDomainSpec::spatter_intensity},
    {"eccentricity_probability", &SyntheticDomainSpec::eccentricity_probability},
    {"eccentricity_factor", &SyntheticDomainSpec::eccentricity_factor},
    {"dropout_probability", &SyntheticDomainSpec::dropout_probability},
    {"dropout_fraction", &SyntheticDomainSpec::dropout_fraction},
};
const CountField kCountFields[] = {
    {"train_normal", &SyntheticDomainSpec::train_normal},
    {"train_abnormal", &SyntheticDomainSpec::train_abnormal},
    {"validation_per_class", &SyntheticDomainSpec::validation_per_class},
    {"test_per_class", &SyntheticDomainSpec::test_per_class},
};
const IntField kIntFields[] = {
    {"spatter_min", &SyntheticDomainSpec::spatter_min},
    {"spatter_max", &SyntheticDomainSpec::spatter_max},
};

void check(bool ok, const std::string& what)
{
    if (!ok)
        throw ConfigError("synthetic spec: " + what);
}

}  // namespace

void SyntheticDomainSpec::validate() const
{
    check(pixel_size > 0.0, "pixel_size must be positive");
    check(diameter_spread >= 0.0, "diameter_spread must be non-negative");
    check(diameter_mean - diameter_spread > 4.0 && diameter_mean + diameter_spread < 70.0,
          "diameters must stay inside (4, 70) pixels");
    check(elongation_max >= 1.0, "elongation_max must be >= 1");
    check(eccentricity_factor >= 1.0, "eccentricity_factor must be >= 1");
    check(noise_sigma >= 0.0, "noise_sigma must be non-negative");
    for (double p : {flare_probability, spatter_probability, eccentricity_probability, dropout_probability})
        check(p >= 0.0 && p <= 1.0, "probabilities must lie in [0,1]");
    check(spatter_probability + eccentricity_probability + dropout_probability > 0.0,
          "at least one abnormality must have non-zero probability");
    check(spatter_min >= 1 && spatter_min <= spatter_max, "spatter counts must satisfy 1 <= min <= max");
    check(dropout_fraction >= 0.0 && dropout_fraction <= 1.0, "dropout_fraction must lie in [0,1]");
    check(tail_length >= 0.0 && tail_decay >= 0.0 && center_jitter >= 0.0, "tail and jitter must be non-negative");
    check(spatter_radius > 0.0, "spatter_radius must be positive");
    check(brightness_gain > 0.0, "brightness_gain must be positive");
}

SyntheticBenchmarkSpec SyntheticBenchmarkSpec::from_config(const KeyValues& kv)
{
    SyntheticBenchmarkSpec spec;
    spec.target.pixel_size = 25.0;
    std::vector<std::string> allowed;
    for (const char* prefix : {"source.", "target."}) {
        SyntheticDomainSpec& d = prefix[0] == 's' ? spec.source : spec.target;
        for (const auto& f : kRealFields) {
            allowed.push_back(prefix + std::string(f.key));
            d.*f.member = kv.real(allowed.back(), d.*f.member);
        }
        for (const auto& f : kCountFields) {
            allowed.push_back(prefix + std::string(f.key));
            d.*f.member = static_cast<std::size_t>(kv.u64(allowed.back(), d.*f.member));
        }
        for (const auto& f : kIntFields) {
            allowed.push_back(prefix + std::string(f.key));
            d.*f.member = static_cast<int>(kv.integer(allowed.back(), d.*f.member));
        }
        allowed.push_back(prefix + std::string("seed"));
        d.seed = kv.u64(allowed.back(), d.seed);
    }
    kv.require_known(allowed);
    try {
        spec.source.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(kv.origin() + ": source: " + e.what());
    }
    try {
        spec.target.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(kv.origin() + ": target: " + e.what());
    }
    return spec;
}

KeyValues SyntheticBenchmarkSpec::to_config() const
{
    KeyValues kv;
    for (const char* prefix : {"source.", "target."}) {
        const SyntheticDomainSpec& d = prefix[0] == 's' ? source : target;
        for (const auto& f : kRealFields)
            kv.set(prefix + std::string(f.key), format_real(d.*f.member));
        for (const auto& f : kCountFields)
            kv.set(prefix + std::string(f.key), std::to_string(d.*f.member));
        for (const auto& f : kIntFields)
            kv.set(prefix + std::string(f.key), std::to_string(d.*f.member));
        kv.set(prefix + std::string("seed"), std::to_string(d.seed));
    }
    return kv;
}

// --------------------------------------------------------------- render

Image render_melt_pool(const SyntheticDomainSpec& spec, MeltPoolClass cls, std::uint64_t seed, RenderInfo* info)
{
    Rng rng(seed);
    const double cy = 0.5 * kSide + rng.uniform(-spec.center_jitter, spec.center_jitter);
    const double cx = 0.5 * kSide + rng.uniform(-spec.center_jitter, spec.center_jitter);
    const double diameter = spec.diameter_mean + rng.uniform(-spec.diameter_spread, spec.diameter_spread);
    const double theta = rng.uniform(0.0, kTwoPi);
    double elongation = rng.uniform(1.0, spec.elongation_max);

    bool spatter = false, eccentric = false, dropout = false;
    if (cls == MeltPoolClass::abnormal) {
        spatter = rng.bernoulli(spec.spatter_probability);
        eccentric = rng.bernoulli(spec.eccentricity_probability);
        dropout = rng.bernoulli(spec.dropout_probability);
        if (!spatter && !eccentric && !dropout) {
            // Pick one abnormality in proportion to its probability.
            const double total = spec.spatter_probability + spec.eccentricity_probability + spec.dropout_probability;
            const double u = rng.uniform(0.0, total);
            if (u < spec.spatter_probability)
                spatter = true;
            else if (u < spec.spatter_probability + spec.eccentricity_probability)
                eccentric = true;
            else
                dropout = true;
        }
    }
    if (eccentric)
        elongation = spec.eccentricity_factor * rng.uniform(0.9, 1.1);

    const double major = 0.5 * diameter * std::sqrt(elongation);
    const double minor = 0.5 * diameter / std::sqrt(elongation);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double tail_len = std::max(1e-6, spec.tail_length * diameter);
    const double tail_width = 0.7 * minor;

    // Dropout: a half-plane through the pool loses part of its intensity.
    const double drop_angle = rng.uniform(0.0, kTwoPi);
    const double drop_ny = std::sin(drop_angle), drop_nx = std::cos(drop_angle);
    const double drop_offset = rng.uniform(-0.2, 0.3) * major;

    struct Dot {
        double y, x;
    };
    std::vector<Dot> dots;
    const double dot_sigma = std::max(0.6, spec.spatter_radius * diameter);
    if (spatter) {
        const int count = spec.spatter_min + static_cast<int>(rng.below(
                                                  static_cast<std::uint64_t>(spec.spatter_max - spec.spatter_min + 1)));
        const double r_min = major + 3.0 * dot_sigma + 2.0;
        const double r_max = std::max(r_min + 1.0, std::min(3.2 * major + 4.0, 0.5 * kSide - 4.0));
        for (int tries = 0; static_cast<int>(dots.size()) < count && tries < 500; ++tries) {
            const double phi = rng.uniform(0.0, kTwoPi), r = rng.uniform(r_min, r_max);
            const Dot d{cy + r * std::sin(phi), cx + r * std::cos(phi)};
            if (d.y < 3.0 || d.x < 3.0 || d.y > kSide - 4.0 || d.x > kSide - 4.0)
                continue;
            const bool clear = std::all_of(dots.begin(), dots.end(), [&](const Dot& o) {
                return std::hypot(o.y - d.y, o.x - d.x) >= 6.0 * dot_sigma + 2.0;
            });
            if (clear)
                dots.push_back(d);
        }
    }

    const bool flare = rng.bernoulli(spec.flare_probability);
    const double flare_y = rng.uniform(10.0, kSide - 10.0), flare_x = rng.uniform(10.0, kSide - 10.0);
    const double flare_sigma = rng.uniform(10.0, 20.0);
    const double flare_amp = spec.flare_intensity * rng.uniform(0.5, 1.0);

    Image img(kSide, kSide);
    for (std::size_t y = 0; y < kSide; ++y)
        for (std::size_t x = 0; x < kSide; ++x) {
            const double py = static_cast<double>(y) + 0.5 - cy, px = static_cast<double>(x) + 0.5 - cx;
            const double u = px * ct + py * st;   // along travel direction
            const double v = -px * st + py * ct;  // across
            const double pool = spec.peak_intensity * std::exp(-2.0 * (u * u / (major * major) + v * v / (minor * minor)));
            const double across = std::exp(-2.0 * v * v / (tail_width * tail_width));
            const double s = -u;  // distance behind the pool center
            const double tail = s >= 0.0 ? spec.tail_intensity * std::exp(-spec.tail_decay * s / tail_len) * across
                                         : spec.tail_intensity * std::exp(-8.0 * s * s / (major * major)) * across;
            double value = std::max(pool, tail);
            if (dropout && py * drop_ny + px * drop_nx > drop_offset)
                value *= 1.0 - spec.dropout_fraction;
            for (const Dot& d : dots) {
                const double dy = static_cast<double>(y) + 0.5 - d.y, dx = static_cast<double>(x) + 0.5 - d.x;
                value = std::max(value, spec.spatter_intensity * std::exp(-0.5 * (dy * dy + dx * dx) / (dot_sigma * dot_sigma)));
            }
            if (flare) {
                const double fy = static_cast<double>(y) - flare_y, fx = static_cast<double>(x) - flare_x;
                value += flare_amp * std::exp(-0.5 * (fy * fy + fx * fx) / (flare_sigma * flare_sigma));
            }
            img.at(y, x) = static_cast<float>(value * spec.brightness_gain + spec.background);
        }
    if (spec.noise_sigma > 0.0) {
        Rng noise(seed, 1, 0x6e6f6973);
        for (auto& p : img.pixels)
            p += static_cast<float>(spec.noise_sigma * noise.normal());
    }
    for (auto& p : img.pixels)
        p = std::clamp(p, 0.0f, 1.0f);

    if (info)
        *info = {static_cast<int>(dots.size()), eccentric, dropout, cy, cx};
    return img;
}

// ------------------------------------------------------------ generation

void apply_reference_counts(SyntheticBenchmarkSpec& spec)
{
    spec.source.train_normal = spec.source.train_abnormal = 323;
    spec.target.train_normal = kReferenceTargetTrain / 2 + kReferenceTargetTrain % 2;
    spec.target.train_abnormal = kReferenceTargetTrain / 2;
    for (auto* d : {&spec.source, &spec.target})
        d->validation_per_class = d->test_per_class = 50;
}

namespace {

LabeledDataset render_split(const SyntheticDomainSpec& spec, Domain domain, Split split, std::size_t normal,
                            std::size_t abnormal)
{
    LabeledDataset out{domain, split, {}, {}, {}};
    const std::uint64_t salt = 0x73796e00ULL + static_cast<std::uint64_t>(domain) * 16 + static_cast<std::uint64_t>(split);
    for (std::size_t i = 0; i < normal + abnormal; ++i) {
        const bool is_abnormal = i >= normal;
        out.images.push_back(render_melt_pool(spec, is_abnormal ? MeltPoolClass::abnormal : MeltPoolClass::normal,
                                               substream_seed(spec.seed, i, salt)));
        out.labels.push_back(is_abnormal ? kAbnormal : kNormal);
        char id[64];
        std::snprintf(id, sizeof id, "%s-%s-%06zu", domain_name(domain), split_name(split), i);
        out.ids.push_back(id);
    }
    return out;
}

// Interleaves the classes deterministically so unlabeled sets carry no
// ordering hint about their labels.
LabeledDataset shuffled(LabeledDataset d, std::uint64_t seed)
{
    std::vector<std::size_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng rng(seed, 0, 0x736866);
    rng.shuffle(order.begin(), order.end());
    LabeledDataset out{d.domain, d.split, {}, {}, {}};
    for (auto i : order) {
        out.images.push_back(std::move(d.images[i]));
        out.labels.push_back(d.labels[i]);
        out.ids.push_back(d.ids[i]);
    }
    return out;
}

}  // namespace

SyntheticBenchmark generate_domain_pair(const SyntheticDomainSpec& source, const SyntheticDomainSpec& target,
                                        bool reference_counts)
{
    SyntheticBenchmarkSpec spec{source, target};
    if (reference_counts)
        apply_reference_counts(spec);
    spec.source.validate();
    spec.target.validate();
    const auto& s = spec.source;
    const auto& t = spec.target;

    SyntheticBenchmark b;
    b.source_train = render_split(s, Domain::source, Split::train, s.train_normal, s.train_abnormal);
    b.source_validation =
        render_split(s, Domain::source, Split::validation, s.validation_per_class, s.validation_per_class);
    b.source_test = render_split(s, Domain::source, Split::test, s.test_per_class, s.test_per_class);
    auto [unlabeled, answers] =
        seal(shuffled(render_split(t, Domain::target, Split::train, t.train_normal, t.train_abnormal), t.seed));
    b.target_train = std::move(unlabeled);
    b.target_train_answers = std::move(answers);
    b.target_validation =
        render_split(t, Domain::target, Split::validation, t.validation_per_class, t.validation_per_class);
    b.target_test = render_split(t, Domain::target, Split::test, t.test_per_class, t.test_per_class);
    return b;
}

void write_benchmark(const SyntheticBenchmark& bench, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    auto emit = [&](const DomainDataset& d, Domain domain, Split split) {
        const std::string stem = std::string(domain_name(domain)) + "." + split_name(split);
        save_dataset(d, root / (stem + ".mpds"));
        write_image_dir(d, root / domain_name(domain));
    };
    emit(bench.source_train, Domain::source, Split::train);
    emit(bench.source_validation, Domain::source, Split::validation);
    emit(bench.source_test, Domain::source, Split::test);
    emit(bench.target_train, Domain::target, Split::train);
    emit(bench.target_validation, Domain::target, Split::validation);
    emit(bench.target_test, Domain::target, Split::test);
    save_sealed(bench.target_train_answers, root / "target.train.sealed");
}

}  // namespace mpda
