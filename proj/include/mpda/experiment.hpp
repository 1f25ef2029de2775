#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mpda/augment.hpp"
#include "mpda/config.hpp"
#include "mpda/synthetic.hpp"
#include "mpda/trainer.hpp"

namespace mpda {

/// Everything a run is allowed to see. Target-train data is unlabeled; the
/// sealed answer file is never part of this struct.
struct ExperimentData {
    LabeledDataset source_train;
    LabeledDataset source_validation;
    LabeledDataset source_test;
    UnlabeledDataset target_train;
    LabeledDataset target_validation;
    LabeledDataset target_test;
};

ExperimentData experiment_data(const SyntheticBenchmark& bench);

/// Reads `<dir>/{source,target}.{train,validation,test}.mpds`.
ExperimentData load_experiment_data(const std::filesystem::path& dir);

/// Resolved settings of one run. See `run_config_keys()` for the file keys.
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t batch_size = 64;
    DomainHead head = DomainHead::deep;
    double lambda = 1.0;
    DiscrepancyMetric metric = DiscrepancyMetric::symmetric_bce;
    LearningRates lr;
    // Per-phase overrides of `lr`, indexed by Phase.
    std::vector<std::optional<LearningRates>> phase_lr = std::vector<std::optional<LearningRates>>(5);

    std::size_t pretrain_epochs = 24;
    std::size_t adapt_epochs = 24;
    std::size_t decision_epochs = 23;
    std::size_t finetune_epochs = 10;
    std::size_t finetune_examples = 20;
    std::size_t baseline_epochs = 30;
    std::optional<ConvergenceRule> convergence;

    bool augment = true;
    std::size_t validation_copies = 10;
    AugmentationConfig aug;
    DenoiseMethod source_denoise;
    DenoiseMethod target_denoise{DenoiseMethod::Kind::median3, 0.0f};

    std::string data_dir;
    std::string from_checkpoint;  // empty for fresh models
    bool deterministic = true;

    static RunConfig from_config(const KeyValues& kv);
    KeyValues to_config() const;
    std::string digest() const;

    PhaseConfig phase(Phase p) const;
};

/// Recognised keys of a run config file.
const std::vector<std::string>& run_config_keys();

/// Source train/validation after augmentation (or unchanged when disabled).
struct TrainingSets {
    LabeledDataset source_train;
    LabeledDataset source_validation;
};

TrainingSets training_sets(const ExperimentData& data, const RunConfig& config);

struct PipelineResult {
    TrainingState state;
    Evaluation after_pretrain;  // target test
    Evaluation after_adapt;
    Evaluation after_decision;
    std::vector<MetricsRecord> metrics;
};

/// Pretrain, domain-align, decision-align from fresh models.
PipelineResult run_pipeline(const ExperimentData& data, const RunConfig& config, const EpochCallback& on_epoch = {});

/// Deterministic class-balanced pick of `count` examples.
LabeledDataset balanced_subset(const LabeledDataset& dataset, std::size_t count, std::uint64_t seed);

}  // namespace mpda
