#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "mpda/dataset.hpp"
#include "mpda/image.hpp"

namespace mpda {

/// Which pixel sizes feed the zoom-ratio formula: the native sensor values,
/// or the effective values after each domain's images are resized to 80x80.
enum class PixelSizeBasis { native, resized };

struct AugmentationConfig {
    double source_pixel_size = 8.0;   // um / pixel
    double target_pixel_size = 25.0;  // um / pixel
    double zoom_factor = 0.0625;      // half-width of the zoom interval (relative)
    std::optional<std::pair<double, double>> zoom_override;
    PixelSizeBasis pixel_basis = PixelSizeBasis::native;
    std::size_t source_image_side = 120;  // native side, used by the resized basis
    std::size_t target_image_side = 160;
    bool zoom_enabled = true;

    double blur_probability = 0.5;
    double blur_sigma_min = 0.5;
    double blur_sigma_max = 1.5;
    bool dihedral = true;

    std::size_t copies = 10;
    bool append_originals = false;
    std::uint64_t seed = 0;

    /// Throws ContractError on out-of-range fields.
    void validate() const;
    /// Zoom interval actually sampled: the override if set, else the pixel-size formula.
    std::pair<double, double> effective_zoom_range() const;
};

/// [(1-f) * source/target, (1+f) * source/target]
std::pair<double, double> zoom_range(double source_pixel_size, double target_pixel_size, double zoom_factor);

/// Shrinks the content to round(side * ratio) per side and centers it on a
/// black canvas of the original size (odd remainder goes right/bottom).
/// ratio must lie in (0, 1].
Image augment_zoom(const Image& image, double ratio);

/// Normalized Gaussian, radius ceil(3 sigma), reflected borders.
Image augment_blur(const Image& image, double sigma);

/// Element 0..7 of the square's symmetry group: `element % 4` quarter turns
/// counter-clockwise, preceded by a horizontal flip when element >= 4.
Image augment_dihedral(const Image& image, int element);

/// copies x |dataset| label-preserving variants, copy-major order. Each
/// example draws from its own (seed, index) substream.
LabeledDataset augment_dataset(const LabeledDataset& dataset, const AugmentationConfig& config);

}  // namespace mpda
