#include "mpda/experiment.hpp"

#include <algorithm>

#include "mpda/io.hpp"
#include "mpda/random.hpp"

namespace mpda {

ExperimentData experiment_data(const SyntheticBenchmark& b)
{
    return {b.source_train, b.source_validation, b.source_test, b.target_train, b.target_validation, b.target_test};
}

ExperimentData load_experiment_data(const std::filesystem::path& dir)
{
    auto path = [&](const char* stem) { return dir / (std::string(stem) + ".mpds"); };
    ExperimentData d;
    d.source_train = load_labeled(path("source.train"));
    d.source_validation = load_labeled(path("source.validation"));
    d.source_test = load_labeled(path("source.test"));
    d.target_train = load_unlabeled(path("target.train"));
    d.target_validation = load_labeled(path("target.validation"));
    d.target_test = load_labeled(path("target.test"));
    return d;
}

// ------------------------------------------------------------ run config

namespace {

const char* kLrNames[] = {"encoder", "task1", "task2", "domain"};
const char* kPhaseKeys[] = {"pretrain", "adapt", "decision", "finetune", "baseline"};

double& lr_field(LearningRates& lr, int k)
{
    switch (k) {
    case 0: return lr.encoder;
    case 1: return lr.task1;
    case 2: return lr.task2;
    default: return lr.domain;
    }
}

std::string range_str(double lo, double hi)
{
    return format_real(lo) + "," + format_real(hi);
}

}  // namespace

const std::vector<std::string>& run_config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k = {
            "seed", "batch_size", "domain_head", "lambda", "discrepancy", "deterministic", "data.dir",
            "pretrain.epochs", "adapt.epochs", "decision.epochs", "finetune.epochs", "finetune.examples",
            "baseline.epochs", "convergence", "convergence.tolerance", "convergence.window", "aug.enabled",
            "aug.copies", "aug.validation_copies", "aug.append_originals", "aug.source_pixel_size",
            "aug.target_pixel_size", "aug.zoom_factor", "aug.zoom_range", "aug.pixel_basis", "aug.source_image_side",
            "aug.target_image_side", "aug.zoom", "aug.blur_probability", "aug.blur_sigma", "aug.dihedral",
            "denoise.source", "denoise.target", "from"};
        for (int i = 0; i < 4; ++i) {
            k.push_back(std::string("lr.") + kLrNames[i]);
            for (const char* p : kPhaseKeys)
                k.push_back(std::string(p) + ".lr." + kLrNames[i]);
        }
        std::sort(k.begin(), k.end());
        return k;
    }();
    return keys;
}

RunConfig RunConfig::from_config(const KeyValues& kv)
{
    kv.require_known(run_config_keys());
    RunConfig c;
    auto positive = [&](const std::string& key, std::size_t fallback, std::size_t min) {
        const auto v = kv.u64(key, fallback);
        if (v < min)
            throw ConfigError((kv.origin().empty() ? std::string("config") : kv.origin()) + ": field '" + key +
                              "': must be at least " + std::to_string(min));
        return static_cast<std::size_t>(v);
    };
    auto wrap = [&](const std::string& key, auto fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError((kv.origin().empty() ? std::string("config") : kv.origin()) + ": field '" + key +
                              "': " + e.what());
        }
    };

    c.seed = kv.u64("seed", c.seed);
    c.batch_size = positive("batch_size", c.batch_size, 2);
    wrap("domain_head", [&] {
        const std::string h = kv.str("domain_head", "deep");
        if (h != "deep" && h != "shallow")
            throw ConfigError(kv.origin() + ": field 'domain_head': expected deep or shallow, got '" + h + "'");
        c.head = h == "deep" ? DomainHead::deep : DomainHead::shallow;
    });
    c.lambda = kv.real("lambda", c.lambda);
    if (!(c.lambda >= 0.0))
        throw ConfigError(kv.origin() + ": field 'lambda': must be non-negative");
    wrap("discrepancy", [&] { c.metric = parse_discrepancy_metric(kv.str("discrepancy", "symmetric-bce")); });
    c.deterministic = kv.boolean("deterministic", true);
    c.data_dir = kv.str("data.dir", "");
    c.from_checkpoint = kv.str("from", "");

    for (int i = 0; i < 4; ++i) {
        const std::string key = std::string("lr.") + kLrNames[i];
        lr_field(c.lr, i) = kv.real(key, lr_field(c.lr, i));
        if (!(lr_field(c.lr, i) > 0.0))
            throw ConfigError(kv.origin() + ": field '" + key + "': must be positive");
    }
    for (int p = 0; p < 5; ++p)
        for (int i = 0; i < 4; ++i) {
            const std::string key = std::string(kPhaseKeys[p]) + ".lr." + kLrNames[i];
            if (!kv.has(key))
                continue;
            if (!c.phase_lr[p])
                c.phase_lr[p] = c.lr;
            lr_field(*c.phase_lr[p], i) = kv.real(key, 0.0);
            if (!(lr_field(*c.phase_lr[p], i) > 0.0))
                throw ConfigError(kv.origin() + ": field '" + key + "': must be positive");
        }

    c.pretrain_epochs = positive("pretrain.epochs", c.pretrain_epochs, 1);
    c.adapt_epochs = positive("adapt.epochs", c.adapt_epochs, 1);
    c.decision_epochs = positive("decision.epochs", c.decision_epochs, 1);
    c.finetune_epochs = positive("finetune.epochs", c.finetune_epochs, 0);
    c.finetune_examples = positive("finetune.examples", c.finetune_examples, 2);
    c.baseline_epochs = positive("baseline.epochs", c.baseline_epochs, 1);
    if (kv.boolean("convergence", false)) {
        ConvergenceRule rule;
        rule.tolerance = kv.real("convergence.tolerance", rule.tolerance);
        rule.window = positive("convergence.window", rule.window, 1);
        if (!(rule.tolerance > 0.0))
            throw ConfigError(kv.origin() + ": field 'convergence.tolerance': must be positive");
        c.convergence = rule;
    }

    c.augment = kv.boolean("aug.enabled", c.augment);
    AugmentationConfig& a = c.aug;
    a.copies = positive("aug.copies", a.copies, 1);
    c.validation_copies = positive("aug.validation_copies", c.validation_copies, 1);
    a.append_originals = kv.boolean("aug.append_originals", a.append_originals);
    a.source_pixel_size = kv.real("aug.source_pixel_size", a.source_pixel_size);
    a.target_pixel_size = kv.real("aug.target_pixel_size", a.target_pixel_size);
    a.zoom_factor = kv.real("aug.zoom_factor", a.zoom_factor);
    a.zoom_override = kv.range("aug.zoom_range");
    wrap("aug.pixel_basis", [&] {
        const std::string b = kv.str("aug.pixel_basis", "native");
        if (b != "native" && b != "resized")
            throw ConfigError(kv.origin() + ": field 'aug.pixel_basis': expected native or resized, got '" + b + "'");
        a.pixel_basis = b == "native" ? PixelSizeBasis::native : PixelSizeBasis::resized;
    });
    a.source_image_side = positive("aug.source_image_side", a.source_image_side, 1);
    a.target_image_side = positive("aug.target_image_side", a.target_image_side, 1);
    a.zoom_enabled = kv.boolean("aug.zoom", a.zoom_enabled);
    a.blur_probability = kv.real("aug.blur_probability", a.blur_probability);
    if (const auto sigma = kv.range("aug.blur_sigma")) {
        a.blur_sigma_min = sigma->first;
        a.blur_sigma_max = sigma->second;
    }
    a.dihedral = kv.boolean("aug.dihedral", a.dihedral);
    wrap("aug", [&] { a.validate(); });

    wrap("denoise.source", [&] { c.source_denoise = DenoiseMethod::parse(kv.str("denoise.source", "none")); });
    wrap("denoise.target", [&] { c.target_denoise = DenoiseMethod::parse(kv.str("denoise.target", "median3")); });
    return c;
}

KeyValues RunConfig::to_config() const
{
    KeyValues kv;
    kv.set("seed", std::to_string(seed));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("domain_head", head == DomainHead::deep ? "deep" : "shallow");
    kv.set("lambda", format_real(lambda));
    kv.set("discrepancy", discrepancy_metric_name(metric));
    kv.set("deterministic", deterministic ? "true" : "false");
    kv.set("data.dir", data_dir);
    kv.set("from", from_checkpoint);
    LearningRates base = lr;
    for (int i = 0; i < 4; ++i)
        kv.set(std::string("lr.") + kLrNames[i], format_real(lr_field(base, i)));
    for (int p = 0; p < 5; ++p)
        if (phase_lr[p]) {
            LearningRates o = *phase_lr[p];
            for (int i = 0; i < 4; ++i)
                kv.set(std::string(kPhaseKeys[p]) + ".lr." + kLrNames[i], format_real(lr_field(o, i)));
        }
    kv.set("pretrain.epochs", std::to_string(pretrain_epochs));
    kv.set("adapt.epochs", std::to_string(adapt_epochs));
    kv.set("decision.epochs", std::to_string(decision_epochs));
    kv.set("finetune.epochs", std::to_string(finetune_epochs));
    kv.set("finetune.examples", std::to_string(finetune_examples));
    kv.set("baseline.epochs", std::to_string(baseline_epochs));
    kv.set("convergence", convergence ? "true" : "false");
    if (convergence) {
        kv.set("convergence.tolerance", format_real(convergence->tolerance));
        kv.set("convergence.window", std::to_string(convergence->window));
    }
    kv.set("aug.enabled", augment ? "true" : "false");
    kv.set("aug.copies", std::to_string(aug.copies));
    kv.set("aug.validation_copies", std::to_string(validation_copies));
    kv.set("aug.append_originals", aug.append_originals ? "true" : "false");
    kv.set("aug.source_pixel_size", format_real(aug.source_pixel_size));
    kv.set("aug.target_pixel_size", format_real(aug.target_pixel_size));
    kv.set("aug.zoom_factor", format_real(aug.zoom_factor));
    kv.set("aug.zoom_range", aug.zoom_override ? range_str(aug.zoom_override->first, aug.zoom_override->second) : "none");
    kv.set("aug.pixel_basis", aug.pixel_basis == PixelSizeBasis::native ? "native" : "resized");
    kv.set("aug.source_image_side", std::to_string(aug.source_image_side));
    kv.set("aug.target_image_side", std::to_string(aug.target_image_side));
    kv.set("aug.zoom", aug.zoom_enabled ? "true" : "false");
    kv.set("aug.blur_probability", format_real(aug.blur_probability));
    kv.set("aug.blur_sigma", range_str(aug.blur_sigma_min, aug.blur_sigma_max));
    kv.set("aug.dihedral", aug.dihedral ? "true" : "false");
    kv.set("denoise.source", source_denoise.str());
    kv.set("denoise.target", target_denoise.str());
    return kv;
}

std::string RunConfig::digest() const
{
    return io::digest_hex(to_config().serialize());
}

PhaseConfig RunConfig::phase(Phase p) const
{
    PhaseConfig pc;
    pc.phase = p;
    pc.batch_size = batch_size;
    pc.lr = phase_lr[static_cast<std::size_t>(p)].value_or(lr);
    pc.lambda = lambda;
    pc.metric = metric;
    pc.convergence = convergence;
    pc.seed = seed;
    switch (p) {
    case Phase::pretrain: pc.epochs = pretrain_epochs; break;
    case Phase::domain_align: pc.epochs = adapt_epochs; break;
    case Phase::decision_align: pc.epochs = decision_epochs; break;
    case Phase::finetune: pc.epochs = finetune_epochs; break;
    case Phase::baseline: pc.epochs = baseline_epochs; break;
    }
    return pc;
}

// -------------------------------------------------------------- pipeline

TrainingSets training_sets(const ExperimentData& data, const RunConfig& config)
{
    if (!config.augment)
        return {data.source_train, data.source_validation};
    AugmentationConfig a = config.aug;
    a.seed = substream_seed(config.seed, 0, 0x617567);
    TrainingSets sets{augment_dataset(data.source_train, a), {}};
    a.copies = config.validation_copies;
    a.seed = substream_seed(config.seed, 1, 0x617567);
    sets.source_validation = augment_dataset(data.source_validation, a);
    return sets;
}

PipelineResult run_pipeline(const ExperimentData& data, const RunConfig& config, const EpochCallback& on_epoch)
{
    const TrainingSets sets = training_sets(data, config);
    PipelineResult r{TrainingState::fresh(config.seed, config.head), {}, {}, {}, {}};
    const EvalSets eval{&sets.source_validation, &data.target_validation, &data.target_test};
    auto keep = [&](const MetricsRecord& m) {
        r.metrics.push_back(m);
        if (on_epoch)
            on_epoch(m);
    };
    pretrain(r.state, sets.source_train, config.phase(Phase::pretrain), eval, keep);
    r.after_pretrain = evaluate(r.state.models, data.target_test);
    domain_align(r.state, sets.source_train, data.target_train, config.phase(Phase::domain_align), eval, keep);
    r.after_adapt = evaluate(r.state.models, data.target_test);
    decision_align(r.state, sets.source_train, data.target_train, config.phase(Phase::decision_align), eval, keep);
    r.after_decision = evaluate(r.state.models, data.target_test);
    return r;
}

LabeledDataset balanced_subset(const LabeledDataset& dataset, std::size_t count, std::uint64_t seed)
{
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < dataset.size(); ++i)
        by_class[dataset.labels[i]].push_back(i);
    Rng rng(seed, 0, 0x737562);
    for (auto& v : by_class)
        rng.shuffle(v.begin(), v.end());
    const std::size_t per_class[2] = {count - count / 2, count / 2};
    LabeledDataset out{dataset.domain, dataset.split, {}, {}, {}};
    std::vector<std::size_t> picked;
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < per_class[c])
            throw BalanceError("balanced_subset: class " + std::to_string(c) + " has only " +
                               std::to_string(by_class[c].size()) + " examples, need " + std::to_string(per_class[c]));
        picked.insert(picked.end(), by_class[c].begin(), by_class[c].begin() + static_cast<long>(per_class[c]));
    }
    std::sort(picked.begin(), picked.end());
    for (auto i : picked) {
        out.images.push_back(dataset.images[i]);
        out.labels.push_back(dataset.labels[i]);
        out.ids.push_back(dataset.ids[i]);
    }
    return out;
}

}  // namespace mpda
