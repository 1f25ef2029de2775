#include "mpda/augment.hpp"

#include <algorithm>
#include <cmath>

#include "mpda/random.hpp"
#include "mpda/tensor.hpp"

namespace mpda {

void AugmentationConfig::validate() const
{
    if (!(source_pixel_size > 0.0) || !(target_pixel_size > 0.0))
        throw ContractError("augmentation: pixel sizes must be positive");
    if (!(zoom_factor >= 0.0 && zoom_factor < 1.0))
        throw ContractError("augmentation: zoom factor must lie in [0,1), got " + std::to_string(zoom_factor));
    if (copies < 1)
        throw ContractError("augmentation: copies must be at least 1");
    if (!(blur_probability >= 0.0 && blur_probability <= 1.0))
        throw ContractError("augmentation: blur probability must lie in [0,1]");
    if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max))
        throw ContractError("augmentation: blur sigma range must satisfy 0 < min <= max");
    if (zoom_override) {
        const auto [lo, hi] = *zoom_override;
        if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
            throw ContractError("augmentation: zoom override must satisfy 0 < lo <= hi <= 1");
    }
    if (source_image_side == 0 || target_image_side == 0)
        throw ContractError("augmentation: native image sides must be positive");
}

std::pair<double, double> AugmentationConfig::effective_zoom_range() const
{
    if (zoom_override)
        return *zoom_override;
    double s = source_pixel_size, t = target_pixel_size;
    if (pixel_basis == PixelSizeBasis::resized) {
        s *= static_cast<double>(source_image_side) / 80.0;
        t *= static_cast<double>(target_image_side) / 80.0;
    }
    return zoom_range(s, t, zoom_factor);
}

std::pair<double, double> zoom_range(double source_pixel_size, double target_pixel_size, double zoom_factor)
{
    if (!(source_pixel_size > 0.0) || !(target_pixel_size > 0.0))
        throw ContractError("zoom_range: pixel sizes must be positive");
    if (!(zoom_factor >= 0.0 && zoom_factor < 1.0))
        throw ContractError("zoom_range: zoom factor must lie in [0,1)");
    const double ratio = source_pixel_size / target_pixel_size;
    return {(1.0 - zoom_factor) * ratio, (1.0 + zoom_factor) * ratio};
}

Image augment_zoom(const Image& image, double ratio)
{
    if (!(ratio > 0.0))
        throw ContractError("augment_zoom: ratio must be positive, got " + std::to_string(ratio));
    if (ratio > 1.0)
        throw ContractError("augment_zoom: zoom-in (ratio " + std::to_string(ratio) +
                            " > 1) is unsupported, it would crop content");
    const auto side_h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(image.height * ratio)));
    const auto side_w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(image.width * ratio)));
    if (side_h == image.height && side_w == image.width)
        return image;
    const Image small = resize_bilinear(image, side_h, side_w);
    Image out(image.height, image.width, 0.0f);
    const std::size_t top = (image.height - side_h) / 2, left = (image.width - side_w) / 2;
    for (std::size_t y = 0; y < side_h; ++y)
        std::copy_n(small.pixels.begin() + static_cast<long>(y * side_w), side_w,
                    out.pixels.begin() + static_cast<long>((top + y) * image.width + left));
    return out;
}

namespace {

// Symmetric reflection: ... c b a | a b c ... d | d c b ...
long reflect(long i, long n)
{
    if (n == 1)
        return 0;
    const long period = 2 * n;
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

Image augment_blur(const Image& image, double sigma)
{
    if (!(sigma > 0.0))
        return image;
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (long k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        total += w;
    }
    for (auto& w : kernel)
        w /= total;

    const long H = static_cast<long>(image.height), W = static_cast<long>(image.width);
    std::vector<double> horiz(image.pixels.size());
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       image.pixels[static_cast<std::size_t>(y * W + reflect(x + k, W))];
            horiz[static_cast<std::size_t>(y * W + x)] = acc;
        }
    Image out(image.height, image.width);
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            double acc = 0.0;
            for (long k = -radius; k <= radius; ++k)
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       horiz[static_cast<std::size_t>(reflect(y + k, H) * W + x)];
            out.pixels[static_cast<std::size_t>(y * W + x)] = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
        }
    return out;
}

Image augment_dihedral(const Image& image, int element)
{
    if (element < 0 || element > 7)
        throw ContractError("augment_dihedral: element must be in 0..7, got " + std::to_string(element));
    if (!image.square() && element % 2 == 1)
        throw ContractError("augment_dihedral: quarter turns need a square image");
    const std::size_t n = image.height, w = image.width;
    Image src = image;
    if (element >= 4)
        for (std::size_t y = 0; y < n; ++y)
            std::reverse(src.pixels.begin() + static_cast<long>(y * w), src.pixels.begin() + static_cast<long>((y + 1) * w));
    for (int turn = 0; turn < element % 4; ++turn) {
        Image rotated(src.width, src.height);
        // Counter-clockwise: (y, x) -> (W-1-x, y)
        for (std::size_t y = 0; y < src.height; ++y)
            for (std::size_t x = 0; x < src.width; ++x)
                rotated.at(src.width - 1 - x, y) = src.at(y, x);
        src = std::move(rotated);
    }
    return src;
}

LabeledDataset augment_dataset(const LabeledDataset& dataset, const AugmentationConfig& config)
{
    config.validate();
    dataset.validate(80);
    const auto [lo, hi] = config.effective_zoom_range();
    if (config.zoom_enabled && (!(lo > 0.0) || hi > 1.0))
        throw ContractError("augment_dataset: zoom range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] must lie within (0, 1]");

    LabeledDataset out{dataset.domain, dataset.split, {}, {}, {}};
    const std::size_t n = dataset.size();
    out.images.reserve(n * config.copies + (config.append_originals ? n : 0));
    for (std::size_t copy = 0; copy < config.copies; ++copy)
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(config.seed, copy * n + i, 0x617567);
            const double ratio = rng.uniform(lo, hi);
            const int element = static_cast<int>(rng.below(8));
            const bool blur = rng.bernoulli(config.blur_probability);
            const double sigma = rng.uniform(config.blur_sigma_min, config.blur_sigma_max);

            Image img = dataset.images[i];
            if (config.zoom_enabled)
                img = augment_zoom(img, ratio);
            if (config.dihedral)
                img = augment_dihedral(img, element);
            if (blur)
                img = augment_blur(img, sigma);
            out.images.push_back(std::move(img));
            out.labels.push_back(dataset.labels[i]);
            out.ids.push_back(dataset.ids[i] + "#aug" + std::to_string(copy));
        }
    if (config.append_originals)
        for (std::size_t i = 0; i < n; ++i) {
            out.images.push_back(dataset.images[i]);
            out.labels.push_back(dataset.labels[i]);
            out.ids.push_back(dataset.ids[i]);
        }
    return out;
}

}  // namespace mpda
