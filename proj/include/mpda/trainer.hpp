#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mpda/dataset.hpp"
#include "mpda/losses.hpp"
#include "mpda/networks.hpp"

namespace mpda {

enum class Phase { pretrain, domain_align, decision_align, finetune, baseline };

const char* phase_name(Phase phase);
Phase parse_phase(const std::string& text);

struct LearningRates {
    double encoder = 1e-3;
    double task1 = 3e-6;
    double task2 = 3e-6;
    double domain = 1e-5;
};

/// Stop a phase early once the monitored loss (L_enc, L_d or L_dis) changes
/// by less than `tolerance` (relative) for `window` consecutive epochs.
struct ConvergenceRule {
    double tolerance = 1e-3;
    std::size_t window = 3;
};

struct PhaseConfig {
    Phase phase = Phase::pretrain;
    std::size_t epochs = 24;
    std::size_t batch_size = 64;
    LearningRates lr;
    double lambda = 1.0;
    DiscrepancyMetric metric = DiscrepancyMetric::symmetric_bce;
    std::optional<ConvergenceRule> convergence;
    std::uint64_t seed = 1;
    /// Run a phase out of order with a warning instead of a ContractError.
    bool allow_phase_skip = false;

    /// Throws ContractError on non-positive rates, negative lambda, epochs 0
    /// (except for fine-tuning) or batch size < 2.
    void validate() const;
};

/// Epoch means of the losses that apply to the phase plus accuracies.
/// Absent values are written as empty CSV fields.
struct MetricsRecord {
    std::size_t epoch = 0;
    Phase phase = Phase::pretrain;
    std::optional<double> l_enc, l_t1, l_t2, l_d, l_dis;
    std::optional<double> src_val_acc, tgt_val_acc, tgt_test_acc;
};

inline constexpr const char* kMetricsHeader = "epoch,phase,L_enc,L_t1,L_t2,L_d,L_dis,src_val_acc,tgt_val_acc,tgt_test_acc";

std::string metrics_csv_row(const MetricsRecord& record);
std::string metrics_csv(const std::vector<MetricsRecord>& records);

/// Models plus where they are in the schedule. `last_phase` is "init" for
/// fresh models, otherwise the phase_name of the last completed phase.
struct TrainingState {
    ModelSet models;
    DomainHead head = DomainHead::deep;
    std::string last_phase = "init";
    std::uint32_t epoch = 0;

    static TrainingState fresh(std::uint64_t seed, DomainHead head = DomainHead::deep);
};

struct Confusion {
    std::size_t tn = 0, fp = 0, fn = 0, tp = 0;
};

struct Evaluation {
    double accuracy1 = 0.0;
    double accuracy2 = 0.0;
    double average = 0.0;
    Confusion confusion1;
    Confusion confusion2;
};

/// Eval-mode forward of both task heads; prediction is abnormal when the
/// sigmoid output is >= 0.5.
Evaluation evaluate(ModelSet& models, const LabeledDataset& dataset);
/// Throws ContractError for unlabeled data.
Evaluation evaluate(ModelSet& models, const DomainDataset& dataset);

/// Labeled sets scored after every epoch; null entries are skipped.
struct EvalSets {
    const LabeledDataset* source_validation = nullptr;
    const LabeledDataset* target_validation = nullptr;
    const LabeledDataset* target_test = nullptr;
};

struct PhaseResult {
    std::vector<MetricsRecord> records;
    std::size_t epochs_run = 0;
    bool converged = false;
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

PhaseResult pretrain(TrainingState& state, const LabeledDataset& source, const PhaseConfig& config,
                     const EvalSets& eval = {}, const EpochCallback& on_epoch = {});
/// Throws ContractError for unlabeled input.
PhaseResult pretrain(TrainingState& state, const DomainDataset& source, const PhaseConfig& config,
                     const EvalSets& eval = {}, const EpochCallback& on_epoch = {});

/// Per paired batch: one encoder forward on source+target; then the domain
/// head steps on L_d, the task heads step on their source losses, and the
/// encoder steps on L_t1 + L_t2 - lambda L_d evaluated with the updated heads.
PhaseResult domain_align(TrainingState& state, const LabeledDataset& source, const UnlabeledDataset& target,
                         const PhaseConfig& config, const EvalSets& eval = {}, const EpochCallback& on_epoch = {});

/// Task heads step on L_t + L_dis; the encoder steps on L_t1 + L_t2 only.
PhaseResult decision_align(TrainingState& state, const LabeledDataset& source, const UnlabeledDataset& target,
                           const PhaseConfig& config, const EvalSets& eval = {}, const EpochCallback& on_epoch = {});

/// Phase-1 style supervised updates on a small labeled target subset.
PhaseResult finetune(TrainingState& state, const LabeledDataset& target_subset, const PhaseConfig& config,
                     const EvalSets& eval = {}, const EpochCallback& on_epoch = {});

struct BaselineResult {
    double test_accuracy = 0.0;
    std::vector<MetricsRecord> records;
};

/// Fresh encoder + one task head trained on labeled target data only.
BaselineResult train_baseline(const LabeledDataset& subset, const LabeledDataset& test, const PhaseConfig& config,
                              std::uint64_t model_seed);

/// All loss terms of one shared train-mode forward on (source, target),
/// computed on a copy of the models so nothing is updated.
struct LossBreakdown {
    double l_t1 = 0.0;
    double l_t2 = 0.0;
    double l_d = 0.0;
    double l_dis = 0.0;
    double l_enc_pretrain = 0.0;  // L_t1 + L_t2
    double l_enc_adapt = 0.0;     // L_t1 + L_t2 - lambda L_d
};

LossBreakdown loss_breakdown(const ModelSet& models, const Tensor& source_images, const Tensor& source_labels,
                             const Tensor& target_images, double lambda, DiscrepancyMetric metric);

struct EmbeddingTable {
    std::vector<std::array<float, kEmbeddingDim>> rows;
    std::vector<Domain> domains;
    std::vector<std::optional<std::uint8_t>> labels;
    std::vector<Split> splits;
    std::vector<std::array<double, 2>> projection;  // empty unless requested

    std::string csv() const;
};

/// Eval-mode encodings of every example, in dataset order. With `project`
/// the two leading principal components over all rows are appended.
EmbeddingTable export_embeddings(ModelSet& models, const std::vector<const DomainDataset*>& datasets, bool project);

}  // namespace mpda
