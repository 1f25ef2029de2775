#pragma once

#include <cstdint>
#include <string>

#include "mpda/config.hpp"
#include "mpda/dataset.hpp"
#include "mpda/image.hpp"

namespace mpda {

/// Parameters of one synthetic melt-pool camera setup.
///
/// A normal frame is an oriented elliptical Gaussian pool with a fading
/// plume behind it. Abnormal frames add at least one of: spatter dots,
/// a strongly elongated pool, or a dark dropout across part of the pool.
/// Lengths are in pixels of the rendered 80x80 frame.
struct SyntheticDomainSpec {
    double pixel_size = 8.0;  // um / pixel, informational (zoom-ratio experiments)
    double diameter_mean = 28.0;
    double diameter_spread = 4.0;  // uniform +- spread
    double elongation_max = 1.3;   // normal pools: major/minor axis ratio in [1, max]
    double center_jitter = 2.0;

    double tail_length = 1.2;  // in pool diameters
    double tail_intensity = 0.45;
    double tail_decay = 2.5;   // e-folds over the tail length

    double peak_intensity = 0.9;
    double brightness_gain = 1.0;
    double background = 0.03;
    double noise_sigma = 0.01;
    double flare_probability = 0.0;
    double flare_intensity = 0.25;

    // Abnormality model
    double spatter_probability = 0.6;
    int spatter_min = 2;
    int spatter_max = 5;
    double spatter_radius = 0.09;  // dot sigma, in pool diameters
    double spatter_intensity = 0.85;
    double eccentricity_probability = 0.3;
    double eccentricity_factor = 2.6;  // major/minor ratio of distorted pools
    double dropout_probability = 0.3;
    double dropout_fraction = 0.7;  // intensity removed in the dropped region

    std::size_t train_normal = 100;
    std::size_t train_abnormal = 100;
    std::size_t validation_per_class = 50;
    std::size_t test_per_class = 50;

    std::uint64_t seed = 1;

    /// Throws ConfigError for values outside their documented ranges.
    void validate() const;
};

struct SyntheticBenchmarkSpec {
    SyntheticDomainSpec source;
    SyntheticDomainSpec target;

    /// Keys are `source.<field>` / `target.<field>`; unknown keys are errors.
    static SyntheticBenchmarkSpec from_config(const KeyValues& kv);
    KeyValues to_config() const;
};

enum class MeltPoolClass { normal, abnormal };

/// Noise-free description of what an abnormal render contains, for tests.
struct RenderInfo {
    int spatter_count = 0;
    bool eccentric = false;
    bool dropout = false;
    double center_y = 0.0;
    double center_x = 0.0;
};

Image render_melt_pool(const SyntheticDomainSpec& spec, MeltPoolClass cls, std::uint64_t seed,
                       RenderInfo* info = nullptr);

struct SyntheticBenchmark {
    LabeledDataset source_train;
    LabeledDataset source_validation;
    LabeledDataset source_test;
    UnlabeledDataset target_train;
    SealedLabels target_train_answers;
    LabeledDataset target_validation;
    LabeledDataset target_test;
};

/// Source train 323/323, target train 5819 unlabeled, 50/50 val and test.
void apply_reference_counts(SyntheticBenchmarkSpec& spec);

SyntheticBenchmark generate_domain_pair(const SyntheticDomainSpec& source, const SyntheticDomainSpec& target,
                                        bool reference_counts);

/// Writes datasets (containers + PGM trees) and the sealed answer file:
///   <out>/source.{train,validation,test}.mpds, <out>/target.{...}.mpds,
///   <out>/target.train.sealed, <out>/{source,target}/<split>/<class>/*.pgm
void write_benchmark(const SyntheticBenchmark& bench, const std::string& out_dir);

/// Sample target-train label counts for reference-sized generation.
inline constexpr std::size_t kReferenceTargetTrain = 5819;

}  // namespace mpda
