#include "mpda/dataset.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "mpda/io.hpp"
#include "mpda/random.hpp"

namespace fs = std::filesystem;

namespace mpda {

const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

const char* split_name(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

Domain parse_domain(const std::string& text)
{
    if (text == "source")
        return Domain::source;
    if (text == "target")
        return Domain::target;
    throw ContractError("unknown domain '" + text + "' (expected source or target)");
}

Split parse_split(const std::string& text)
{
    if (text == "train")
        return Split::train;
    if (text == "validation" || text == "val")
        return Split::validation;
    if (text == "test")
        return Split::test;
    throw ContractError("unknown split '" + text + "' (expected train, validation or test)");
}

namespace {

void validate_images(const std::vector<Image>& images, std::size_t side, const char* what)
{
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& img = images[i];
        if (img.pixels.size() != img.height * img.width)
            throw ContractError(std::string(what) + ": image " + std::to_string(i) + " has inconsistent storage");
        if (side && (img.height != side || img.width != side))
            throw ContractError(std::string(what) + ": image " + std::to_string(i) + " is " +
                                std::to_string(img.height) + "x" + std::to_string(img.width) + ", expected " +
                                std::to_string(side) + "x" + std::to_string(side));
        for (float p : img.pixels)
            if (!(p >= 0.0f && p <= 1.0f))
                throw ContractError(std::string(what) + ": image " + std::to_string(i) +
                                    " has intensities outside [0,1]");
    }
}

}  // namespace

std::size_t LabeledDataset::count(std::uint8_t label) const
{
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void LabeledDataset::validate(std::size_t side) const
{
    if (labels.size() != images.size() || ids.size() != images.size())
        throw ContractError("labeled dataset: " + std::to_string(images.size()) + " images, " +
                            std::to_string(labels.size()) + " labels, " + std::to_string(ids.size()) + " ids");
    for (auto l : labels)
        if (l > 1)
            throw ContractError("labeled dataset: label " + std::to_string(l) + " is not 0 or 1");
    validate_images(images, side, "labeled dataset");
}

void UnlabeledDataset::validate(std::size_t side) const
{
    if (ids.size() != images.size())
        throw ContractError("unlabeled dataset: " + std::to_string(images.size()) + " images, " +
                            std::to_string(ids.size()) + " ids");
    validate_images(images, side, "unlabeled dataset");
}

std::pair<UnlabeledDataset, SealedLabels> seal(LabeledDataset dataset)
{
    SealedLabels sealed{dataset.ids, std::move(dataset.labels)};
    UnlabeledDataset open{dataset.domain, dataset.split, std::move(dataset.images), std::move(dataset.ids)};
    return {std::move(open), std::move(sealed)};
}

LabeledDataset unseal(const UnlabeledDataset& dataset, const SealedLabels& sealed)
{
    if (sealed.ids != dataset.ids)
        throw ContractError("unseal: sealed answer ids do not match the dataset");
    return {dataset.domain, dataset.split, dataset.images, sealed.labels, dataset.ids};
}

// ------------------------------------------------------------- container

namespace {

constexpr std::string_view kDatasetMagic = "MPDADSET";
constexpr std::string_view kSealMagic = "MPDASEAL";
constexpr std::uint32_t kSealVersion = 1;

void write_images(io::Writer& w, const std::vector<Image>& images)
{
    const std::size_t h = images.empty() ? 0 : images.front().height;
    const std::size_t wd = images.empty() ? 0 : images.front().width;
    w.u32(static_cast<std::uint32_t>(images.size()));
    w.u32(static_cast<std::uint32_t>(h));
    w.u32(static_cast<std::uint32_t>(wd));
    for (const auto& img : images) {
        if (img.height != h || img.width != wd)
            throw ContractError("dataset container: images must share one size");
        w.floats(img.pixels.data(), img.pixels.size());
    }
}

}  // namespace

std::string encode_dataset(const DomainDataset& dataset)
{
    io::Writer w;
    w.raw(kDatasetMagic);
    w.u32(kDatasetVersion);
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            constexpr bool labeled = std::is_same_v<D, LabeledDataset>;
            d.validate();
            w.u8(static_cast<std::uint8_t>(d.domain));
            w.u8(static_cast<std::uint8_t>(d.split));
            w.u8(labeled ? 1 : 0);
            write_images(w, d.images);
            if constexpr (labeled)
                for (auto l : d.labels)
                    w.u8(l);
            for (const auto& id : d.ids)
                w.str(id);
        },
        dataset);
    return w.bytes();
}

DomainDataset decode_dataset(std::string_view bytes)
{
    io::Reader r(bytes, "dataset container");
    if (r.raw(kDatasetMagic.size()) != kDatasetMagic)
        throw io::FormatError("dataset container: bad magic");
    const auto version = r.u32();
    if (version != kDatasetVersion)
        throw io::FormatError("dataset container: unsupported version " + std::to_string(version));
    const auto domain = r.u8(), split = r.u8(), has_labels = r.u8();
    if (domain > 1 || split > 2 || has_labels > 1)
        throw io::FormatError("dataset container: corrupt header");
    const auto count = r.u32(), h = r.u32(), w = r.u32();
    std::vector<Image> images(count, Image(h, w));
    for (auto& img : images)
        r.floats(img.pixels.data(), img.pixels.size());
    std::vector<std::uint8_t> labels;
    if (has_labels)
        for (std::uint32_t i = 0; i < count; ++i)
            labels.push_back(r.u8());
    std::vector<std::string> ids;
    for (std::uint32_t i = 0; i < count; ++i)
        ids.push_back(r.str());
    if (r.remaining() != 0)
        throw io::FormatError("dataset container: trailing bytes");
    if (has_labels) {
        LabeledDataset d{static_cast<Domain>(domain), static_cast<Split>(split), std::move(images), std::move(labels),
                         std::move(ids)};
        d.validate();
        return d;
    }
    UnlabeledDataset d{static_cast<Domain>(domain), static_cast<Split>(split), std::move(images), std::move(ids)};
    d.validate();
    return d;
}

void save_dataset(const DomainDataset& dataset, const fs::path& path) { io::write_file(path, encode_dataset(dataset)); }

DomainDataset load_dataset(const fs::path& path) { return decode_dataset(io::read_file(path)); }

LabeledDataset load_labeled(const fs::path& path)
{
    auto d = load_dataset(path);
    if (auto* l = std::get_if<LabeledDataset>(&d))
        return std::move(*l);
    throw ContractError(path.string() + ": dataset is unlabeled, a labeled set is required");
}

UnlabeledDataset load_unlabeled(const fs::path& path)
{
    auto d = load_dataset(path);
    if (auto* u = std::get_if<UnlabeledDataset>(&d))
        return std::move(*u);
    throw ContractError(path.string() + ": dataset carries labels, an unlabeled set is required");
}

std::string encode_sealed(const SealedLabels& sealed)
{
    if (sealed.ids.size() != sealed.labels.size())
        throw ContractError("sealed labels: id/label count mismatch");
    io::Writer w;
    w.raw(kSealMagic);
    w.u32(kSealVersion);
    w.u32(static_cast<std::uint32_t>(sealed.labels.size()));
    for (auto l : sealed.labels)
        w.u8(l);
    for (const auto& id : sealed.ids)
        w.str(id);
    return w.bytes();
}

SealedLabels decode_sealed(std::string_view bytes)
{
    io::Reader r(bytes, "sealed answer file");
    if (r.raw(kSealMagic.size()) != kSealMagic)
        throw io::FormatError("sealed answer file: bad magic");
    if (r.u32() != kSealVersion)
        throw io::FormatError("sealed answer file: unsupported version");
    SealedLabels s;
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i)
        s.labels.push_back(r.u8());
    for (std::uint32_t i = 0; i < n; ++i)
        s.ids.push_back(r.str());
    return s;
}

void save_sealed(const SealedLabels& sealed, const fs::path& path) { io::write_file(path, encode_sealed(sealed)); }

SealedLabels load_sealed(const fs::path& path) { return decode_sealed(io::read_file(path)); }

// ------------------------------------------------------- directory trees

namespace {

std::vector<fs::path> image_files(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".png")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

DomainDataset load_image_dir(const fs::path& root, Domain domain, Split split)
{
    const fs::path dir = root / split_name(split);
    if (!fs::is_directory(dir))
        throw IngestionError(dir.string() + ": split directory not found");
    const bool has_normal = fs::is_directory(dir / "normal");
    const bool has_abnormal = fs::is_directory(dir / "abnormal");
    const bool has_unlabeled = fs::is_directory(dir / "unlabeled");

    if (!has_normal && !has_abnormal) {
        if (!has_unlabeled)
            throw IngestionError(dir.string() + ": expected normal/, abnormal/ or unlabeled/ subdirectories");
        UnlabeledDataset out{domain, split, {}, {}};
        const auto files = image_files(dir / "unlabeled");
        if (files.empty())
            std::cerr << "warning: " << (dir / "unlabeled").string() << " contains no images\n";
        for (const auto& f : files) {
            out.images.push_back(read_image(f));
            out.ids.push_back(f.filename().string());
        }
        return out;
    }

    LabeledDataset out{domain, split, {}, {}, {}};
    const std::pair<const char*, std::uint8_t> classes[] = {{"normal", kNormal}, {"abnormal", kAbnormal}};
    for (const auto& [name, label] : classes) {
        const fs::path cdir = dir / name;
        const auto files = fs::is_directory(cdir) ? image_files(cdir) : std::vector<fs::path>{};
        if (files.empty())
            std::cerr << "warning: " << cdir.string() << " contains no images\n";
        for (const auto& f : files) {
            out.images.push_back(read_image(f));
            out.labels.push_back(label);
            out.ids.push_back(std::string(name) + "/" + f.filename().string());
        }
    }
    return out;
}

void write_image_dir(const DomainDataset& dataset, const fs::path& root)
{
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            const fs::path dir = root / split_name(d.split);
            for (std::size_t i = 0; i < d.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "%06zu.pgm", i);
                const char* cls = "unlabeled";
                if constexpr (std::is_same_v<D, LabeledDataset>)
                    cls = d.labels[i] == kNormal ? "normal" : "abnormal";
                write_pgm(d.images[i], dir / cls / name);
            }
        },
        dataset);
}

// -------------------------------------------------------------- balance

LabeledDataset balance_downsample(const LabeledDataset& dataset, std::uint64_t seed)
{
    dataset.validate();
    const std::size_t n0 = dataset.count(kNormal), n1 = dataset.count(kAbnormal);
    if (n0 == 0 || n1 == 0)
        throw BalanceError("balance_downsample: class " + std::string(n0 == 0 ? "normal" : "abnormal") +
                           " has no examples");
    const std::uint8_t majority = n0 > n1 ? kNormal : kAbnormal;
    const std::size_t keep = std::min(n0, n1);

    std::vector<std::size_t> majority_idx;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (dataset.labels[i] == majority)
            majority_idx.push_back(i);
    Rng rng(seed, 0, 0x62616c);
    rng.shuffle(majority_idx.begin(), majority_idx.end());
    std::vector<bool> keep_mask(dataset.size(), true);
    for (std::size_t k = keep; k < majority_idx.size(); ++k)
        keep_mask[majority_idx[k]] = false;

    LabeledDataset out{dataset.domain, dataset.split, {}, {}, {}};
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (keep_mask[i]) {
            out.images.push_back(dataset.images[i]);
            out.labels.push_back(dataset.labels[i]);
            out.ids.push_back(dataset.ids[i]);
        }
    return out;
}

// ------------------------------------------------------------- batching

BatchPlan::BatchPlan(std::size_t source_size, std::size_t batch_size, std::uint64_t seed)
    : source_size_(source_size), target_size_(0), batch_size_(batch_size), seed_(seed), pairing_(Pairing::source_only)
{
    if (source_size == 0)
        throw ContractError("make_batches: empty dataset");
    if (batch_size < 2)
        throw ContractError("make_batches: batch size must be at least 2 (batchnorm), got " +
                            std::to_string(batch_size));
}

BatchPlan::BatchPlan(std::size_t source_size, std::size_t target_size, std::size_t batch_size, std::uint64_t seed)
    : BatchPlan(source_size, batch_size, seed)
{
    if (target_size == 0)
        throw ContractError("make_batches: empty target dataset");
    target_size_ = target_size;
    pairing_ = Pairing::source_target;
}

std::vector<Batch> BatchPlan::epoch(std::size_t index) const
{
    std::vector<std::size_t> order(source_size_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed_, index, 0x737263);
    rng.shuffle(order.begin(), order.end());

    std::vector<std::size_t> target_stream;
    std::size_t wrap = 0;
    auto next_target = [&](std::size_t count) {
        std::vector<std::size_t> out;
        while (out.size() < count) {
            if (target_stream.empty()) {
                target_stream.resize(target_size_);
                std::iota(target_stream.begin(), target_stream.end(), std::size_t{0});
                Rng trng(seed_, index * 1000003ULL + wrap++, 0x746774);
                trng.shuffle(target_stream.begin(), target_stream.end());
                std::reverse(target_stream.begin(), target_stream.end());
            }
            out.push_back(target_stream.back());
            target_stream.pop_back();
        }
        return out;
    };

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < source_size_; start += batch_size_) {
        const std::size_t end = std::min(source_size_, start + batch_size_);
        if (end - start < 2)
            break;
        Batch b;
        b.source.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
        if (pairing_ == Pairing::source_target)
            b.target = next_target(b.source.size());
        batches.push_back(std::move(b));
    }
    return batches;
}

Tensor stack_images(const std::vector<Image>& images, const std::vector<std::size_t>& indices)
{
    if (indices.empty())
        throw ContractError("stack_images: no images");
    const std::size_t h = images[indices.front()].height, w = images[indices.front()].width;
    Tensor out({indices.size(), 1, h, w});
    float* dst = out.ptr();
    for (auto i : indices) {
        const Image& img = images.at(i);
        if (img.height != h || img.width != w)
            throw DimensionError("stack_images: mixed image sizes");
        dst = std::copy(img.pixels.begin(), img.pixels.end(), dst);
    }
    return out;
}

Tensor stack_images(const std::vector<Image>& images)
{
    std::vector<std::size_t> idx(images.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return stack_images(images, idx);
}

Tensor stack_labels(const std::vector<std::uint8_t>& labels, const std::vector<std::size_t>& indices)
{
    Tensor out({indices.size(), 1});
    for (std::size_t k = 0; k < indices.size(); ++k)
        out[k] = static_cast<float>(labels.at(indices[k]));
    return out;
}

}  // namespace mpda
