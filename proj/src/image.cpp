#include "mpda/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <sstream>

#include <png.h>

#include "mpda/io.hpp"

namespace mpda {

namespace {

bool has_suffix(std::string s, const std::string& suffix)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

// ------------------------------------------------------------------ PGM

Image decode_pgm(const std::string& bytes, const std::string& name)
{
    if (bytes.size() < 2 || bytes[0] != 'P')
        throw IngestionError(name + ": not a PNM file");
    const char kind = bytes[1];
    if (kind == '3' || kind == '6')
        throw IngestionError(name + ": grayscale required (file is a color PPM)");
    if (kind != '2' && kind != '5')
        throw IngestionError(name + ": unsupported PNM variant P" + std::string(1, kind));

    std::size_t pos = 2;
    auto next_token = [&]() -> long {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
            ++pos;
        if (start == pos)
            throw IngestionError(name + ": malformed PGM header");
        return std::stol(bytes.substr(start, pos - start));
    };
    const long width = next_token(), height = next_token(), maxval = next_token();
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw IngestionError(name + ": 8-bit grayscale required (maxval " + std::to_string(maxval) + ")");

    Image img(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
    const float scale = 1.0f / static_cast<float>(maxval);
    if (kind == '5') {
        ++pos;  // single whitespace after maxval
        if (bytes.size() < pos + img.pixels.size())
            throw IngestionError(name + ": truncated pixel data");
        for (std::size_t i = 0; i < img.pixels.size(); ++i)
            img.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) * scale;
    } else {
        for (auto& p : img.pixels) {
            const long v = next_token();
            if (v > maxval)
                throw IngestionError(name + ": pixel value exceeds maxval");
            p = static_cast<float>(v) * scale;
        }
    }
    return img;
}

std::string encode_pgm(const Image& image)
{
    std::ostringstream os;
    os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    std::string out = os.str();
    out.reserve(out.size() + image.pixels.size());
    for (float p : image.pixels)
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f))));
    return out;
}

void write_pgm(const Image& image, const std::filesystem::path& path)
{
    io::write_file(path, encode_pgm(image));
}

// ------------------------------------------------------------------ PNG

namespace {

struct PngSource {
    const std::string* bytes;
    std::size_t pos;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t n)
{
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->pos + n > src->bytes->size())
        png_error(png, "truncated PNG");
    std::memcpy(out, src->bytes->data() + src->pos, n);
    src->pos += n;
}

}  // namespace

Image decode_png(const std::string& bytes, const std::string& name)
{
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
        throw IngestionError(name + ": not a PNG file");
    // Color type and depth come straight from IHDR so contract errors never
    // have to cross libpng's longjmp.
    if (bytes.size() < 33 || bytes.compare(12, 4, "IHDR") != 0)
        throw IngestionError(name + ": missing IHDR chunk");
    const int depth = static_cast<unsigned char>(bytes[24]);
    const int color = static_cast<unsigned char>(bytes[25]);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw IngestionError(name + ": grayscale required (PNG color type " + std::to_string(color) + ")");
    if (depth > 8)
        throw IngestionError(name + ": 8-bit grayscale required (bit depth " + std::to_string(depth) + ")");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestionError(name + ": libpng initialisation failed");
    }
    PngSource src{&bytes, 0};
    std::vector<png_bytep> rows;
    std::vector<unsigned char> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestionError(name + ": corrupt PNG");
    }
    png_set_read_fn(png, &src, png_read_cb);
    png_read_info(png, info);
    if (depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    raw.resize(static_cast<std::size_t>(w) * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
    return img;
}

Image read_image(const std::filesystem::path& path)
{
    const std::string name = path.string();
    std::string bytes;
    try {
        bytes = io::read_file(path);
    } catch (const io::IoError& e) {
        throw IngestionError(e.what());
    }
    if (has_suffix(name, ".png"))
        return decode_png(bytes, name);
    if (has_suffix(name, ".pgm"))
        return decode_pgm(bytes, name);
    throw IngestionError(name + ": unsupported extension (expected .pgm or .png)");
}

// ------------------------------------------------------------- resample

namespace {

struct Tap {
    std::size_t first;
    std::vector<float> weights;
};

// Triangle filter taps for each output coordinate along one axis.
std::vector<Tap> triangle_taps(std::size_t in, std::size_t out)
{
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double support = std::max(1.0, scale);
    std::vector<Tap> taps(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double center = (static_cast<double>(o) + 0.5) * scale;
        const auto lo = static_cast<long>(std::floor(center - support));
        const auto hi = static_cast<long>(std::ceil(center + support));
        std::vector<std::pair<long, double>> raw;
        double total = 0.0;
        for (long i = lo; i <= hi; ++i) {
            const double d = std::abs((static_cast<double>(i) + 0.5 - center) / support);
            if (d >= 1.0)
                continue;
            const long clamped = std::clamp<long>(i, 0, static_cast<long>(in) - 1);
            raw.emplace_back(clamped, 1.0 - d);
            total += 1.0 - d;
        }
        long first = raw.front().first, last = raw.front().first;
        for (auto& [i, w] : raw) {
            first = std::min(first, i);
            last = std::max(last, i);
        }
        Tap t{static_cast<std::size_t>(first), std::vector<float>(static_cast<std::size_t>(last - first + 1), 0.0f)};
        for (auto& [i, w] : raw)
            t.weights[static_cast<std::size_t>(i - first)] += static_cast<float>(w / total);
        taps[o] = std::move(t);
    }
    return taps;
}

}  // namespace

Image resize_bilinear(const Image& image, std::size_t height, std::size_t width)
{
    if (height == image.height && width == image.width)
        return image;
    const auto ty = triangle_taps(image.height, height);
    const auto tx = triangle_taps(image.width, width);
    Image horiz(image.height, width);
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < tx[x].weights.size(); ++k)
                acc += tx[x].weights[k] * image.at(y, tx[x].first + k);
            horiz.at(y, x) = acc;
        }
    Image out(height, width);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < ty[y].weights.size(); ++k)
                acc += ty[y].weights[k] * horiz.at(ty[y].first + k, x);
            out.at(y, x) = std::clamp(acc, 0.0f, 1.0f);
        }
    return out;
}

// -------------------------------------------------------------- denoise

Image median3(const Image& image)
{
    Image out(image.height, image.width);
    const auto H = static_cast<long>(image.height), W = static_cast<long>(image.width);
    std::array<float, 9> window;
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            std::size_t n = 0;
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    const long sy = std::clamp(y + dy, 0L, H - 1), sx = std::clamp(x + dx, 0L, W - 1);
                    window[n++] = image.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                }
            std::nth_element(window.begin(), window.begin() + 4, window.end());
            out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = window[4];
        }
    return out;
}

Image threshold_floor(const Image& image, float floor)
{
    Image out = image;
    for (auto& p : out.pixels)
        if (p < floor)
            p = 0.0f;
    return out;
}

DenoiseMethod DenoiseMethod::parse(const std::string& text)
{
    if (text == "none")
        return {};
    if (text == "median3")
        return {Kind::median3, 0.0f};
    const std::string prefix = "threshold(";
    if (text.rfind(prefix, 0) == 0 && text.back() == ')') {
        const std::string num = text.substr(prefix.size(), text.size() - prefix.size() - 1);
        std::size_t used = 0;
        float t = 0.0f;
        try {
            t = std::stof(num, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == num.size() && used > 0 && t >= 0.0f && t <= 1.0f)
            return {Kind::threshold, t};
    }
    throw PreparationError("unknown denoise method '" + text + "' (expected none, median3 or threshold(t))");
}

std::string DenoiseMethod::str() const
{
    switch (kind) {
    case Kind::none: return "none";
    case Kind::median3: return "median3";
    case Kind::threshold: {
        std::ostringstream os;
        os << "threshold(" << threshold << ")";
        return os.str();
    }
    }
    return "none";
}

Image prepare_image(const Image& image, std::size_t side, const DenoiseMethod& denoise)
{
    if (!image.square())
        throw PreparationError("prepare: image is " + std::to_string(image.height) + "x" +
                               std::to_string(image.width) + ", square input required");
    Image cleaned = image;
    if (denoise.kind == DenoiseMethod::Kind::median3)
        cleaned = median3(image);
    else if (denoise.kind == DenoiseMethod::Kind::threshold)
        cleaned = threshold_floor(image, denoise.threshold);
    return resize_bilinear(cleaned, side, side);
}

std::vector<Image> prepare(const std::vector<Image>& images, std::size_t side, const DenoiseMethod& denoise)
{
    std::vector<Image> out;
    out.reserve(images.size());
    for (const auto& img : images)
        out.push_back(prepare_image(img, side, denoise));
    return out;
}

}  // namespace mpda
