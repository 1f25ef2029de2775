#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mpda/image.hpp"
#include "mpda/tensor.hpp"

namespace mpda {

enum class Domain : std::uint8_t { source = 0, target = 1 };
enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

const char* domain_name(Domain d);
const char* split_name(Split s);
Domain parse_domain(const std::string& text);
Split parse_split(const std::string& text);

inline constexpr std::uint8_t kNormal = 0;
inline constexpr std::uint8_t kAbnormal = 1;

/// Class balancing impossible (a class has no examples).
class BalanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Images with a label per image (0 = normal, 1 = abnormal).
struct LabeledDataset {
    Domain domain = Domain::source;
    Split split = Split::train;
    std::vector<Image> images;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> ids;

    std::size_t size() const { return images.size(); }
    std::size_t count(std::uint8_t label) const;
    /// Throws ContractError unless sizes agree, labels are 0/1 and, when
    /// `side` is non-zero, every image is side x side in [0,1].
    void validate(std::size_t side = 0) const;
};

/// Images whose labels the training code can never see: there is no label
/// member to read. Target-train data lives here.
struct UnlabeledDataset {
    Domain domain = Domain::target;
    Split split = Split::train;
    std::vector<Image> images;
    std::vector<std::string> ids;

    std::size_t size() const { return images.size(); }
    void validate(std::size_t side = 0) const;
};

/// Withheld labels for an unlabeled set, matched by id; only scoring code
/// reads these.
struct SealedLabels {
    std::vector<std::string> ids;
    std::vector<std::uint8_t> labels;
};

using DomainDataset = std::variant<LabeledDataset, UnlabeledDataset>;

/// Splits a labeled set into its unlabeled view and the sealed answers.
std::pair<UnlabeledDataset, SealedLabels> seal(LabeledDataset dataset);
/// Reattaches sealed labels for post-hoc scoring (ids must match in order).
LabeledDataset unseal(const UnlabeledDataset& dataset, const SealedLabels& sealed);

// --- binary container
//
//   "MPDADSET", u32 version, u8 domain, u8 split, u8 has_labels,
//   u32 count, u32 height, u32 width,
//   count x height x width float32 (LE), [count x u8 labels], count x str ids
//
// Sealed answer file: "MPDASEAL", u32 version, u32 count, count x u8 labels,
// count x str ids.

inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_dataset(const DomainDataset& dataset);
DomainDataset decode_dataset(std::string_view bytes);
void save_dataset(const DomainDataset& dataset, const std::filesystem::path& path);
DomainDataset load_dataset(const std::filesystem::path& path);
LabeledDataset load_labeled(const std::filesystem::path& path);
UnlabeledDataset load_unlabeled(const std::filesystem::path& path);

std::string encode_sealed(const SealedLabels& sealed);
SealedLabels decode_sealed(std::string_view bytes);
void save_sealed(const SealedLabels& sealed, const std::filesystem::path& path);
SealedLabels load_sealed(const std::filesystem::path& path);

// --- image directory trees: <root>/<split>/<normal|abnormal|unlabeled>/*.{pgm,png}

/// Loads one split. Files are read in lexicographic order, normal before
/// abnormal. If only an `unlabeled` directory exists the result is unlabeled.
/// Empty class directories produce a warning on stderr.
DomainDataset load_image_dir(const std::filesystem::path& root, Domain domain, Split split);

void write_image_dir(const DomainDataset& dataset, const std::filesystem::path& root);

// --- balancing and batching

/// Majority class subsampled without replacement to the minority count;
/// minority examples and the relative order of survivors are preserved.
LabeledDataset balance_downsample(const LabeledDataset& dataset, std::uint64_t seed);

enum class Pairing { source_only, source_target };

struct Batch {
    std::vector<std::size_t> source;
    std::vector<std::size_t> target;  // empty in source-only mode
};

/// Seeded per-epoch batch schedule. Every epoch reshuffles the source set;
/// in paired mode target indices are drawn from fresh permutations, one per
/// wrap, so a shorter target set cycles. A final batch below 2 is dropped.
class BatchPlan {
public:
    BatchPlan(std::size_t source_size, std::size_t batch_size, std::uint64_t seed);
    BatchPlan(std::size_t source_size, std::size_t target_size, std::size_t batch_size, std::uint64_t seed);

    std::vector<Batch> epoch(std::size_t index) const;
    Pairing pairing() const { return pairing_; }

private:
    std::size_t source_size_;
    std::size_t target_size_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    Pairing pairing_;
};

/// Stacks images (all side x side) into [B,1,side,side].
Tensor stack_images(const std::vector<Image>& images, const std::vector<std::size_t>& indices);
Tensor stack_images(const std::vector<Image>& images);
/// [B,1] float labels.
Tensor stack_labels(const std::vector<std::uint8_t>& labels, const std::vector<std::size_t>& indices);

}  // namespace mpda
