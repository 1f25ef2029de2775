#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpda {

/// Grayscale image, row-major, intensities in [0,1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w, fill) {}

    float& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
    bool square() const { return height == width; }

    bool operator==(const Image&) const = default;
};

/// A file that could not be turned into a grayscale image.
class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that violates the preparation contract (non-square, wrong size).
class PreparationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit grayscale PGM (P5 or P2) or PNG; 255 maps to 1.0.
Image read_image(const std::filesystem::path& path);
Image decode_pgm(const std::string& bytes, const std::string& name);
Image decode_png(const std::string& bytes, const std::string& name);
/// Binary P5, values rounded to 8 bits.
std::string encode_pgm(const Image& image);
void write_pgm(const Image& image, const std::filesystem::path& path);

/// Separable triangle-filter resampling. Identical to classic bilinear
/// interpolation when upsampling; when shrinking, the filter support widens
/// with the scale factor so every source pixel contributes (no aliasing).
Image resize_bilinear(const Image& image, std::size_t height, std::size_t width);

Image median3(const Image& image);
/// Intensities below `floor` become 0.
Image threshold_floor(const Image& image, float floor);

struct DenoiseMethod {
    enum class Kind { none, median3, threshold } kind = Kind::none;
    float threshold = 0.0f;

    static DenoiseMethod parse(const std::string& text);
    std::string str() const;
};

/// Denoise then resize a square image to side x side.
Image prepare_image(const Image& image, std::size_t side, const DenoiseMethod& denoise);
std::vector<Image> prepare(const std::vector<Image>& images, std::size_t side, const DenoiseMethod& denoise);

}  // namespace mpda
