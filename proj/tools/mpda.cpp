// mpda: command-line front end for dataset generation, the three training
// phases, evaluation, fine-tuning, baselines, embedding export and sweeps.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "mpda/checkpoint.hpp"
#include "mpda/experiment.hpp"
#include "mpda/io.hpp"
#include "mpda/random.hpp"

namespace fs = std::filesystem;
using namespace mpda;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kContract = 3 };

// ------------------------------------------------------------ run options

struct RunOptions {
    std::string config_file;
    std::vector<std::string> sets;
    std::string data_dir;
    std::string out_dir;
    std::string from;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lambda;
    bool overwrite = false;
    bool strict = false;
};

void add_config_flags(CLI::App* cmd, RunOptions& o)
{
    cmd->add_option("--config", o.config_file, "Run config file (key = value)");
    cmd->add_option("--set", o.sets, "Override a config key, key=value (repeatable)");
    cmd->add_option("--seed", o.seed, "Run seed");
    cmd->add_option("--batch-size", o.batch_size, "Batch size (>= 2)");
}

void add_training_flags(CLI::App* cmd, RunOptions& o, bool needs_from)
{
    add_config_flags(cmd, o);
    cmd->add_option("--data", o.data_dir, "Directory with the .mpds dataset containers");
    cmd->add_option("--out", o.out_dir, "Output directory")->required();
    auto* from = cmd->add_option("--from", o.from, "Checkpoint to resume from");
    if (needs_from)
        from->required();
    cmd->add_option("--epochs", o.epochs, "Epochs for this phase");
    cmd->add_option("--lambda", o.lambda, "Trade-off factor of the domain term");
    cmd->add_flag("--overwrite", o.overwrite, "Replace existing outputs");
    cmd->add_flag("--strict", o.strict, "Treat phase-order violations as errors");
}

const char* epochs_key(Phase p)
{
    switch (p) {
    case Phase::pretrain: return "pretrain.epochs";
    case Phase::domain_align: return "adapt.epochs";
    case Phase::decision_align: return "decision.epochs";
    case Phase::finetune: return "finetune.epochs";
    case Phase::baseline: return "baseline.epochs";
    }
    return "";
}

KeyValues resolve_kv(const RunOptions& o, std::optional<Phase> phase)
{
    KeyValues kv = o.config_file.empty() ? KeyValues{} : KeyValues::load(o.config_file);
    KeyValues flags = KeyValues::parse("", "command line");
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("command line: --set expects key=value, got '" + s + "'");
        flags.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed)
        flags.set("seed", std::to_string(*o.seed));
    if (o.batch_size)
        flags.set("batch_size", std::to_string(*o.batch_size));
    if (o.lambda)
        flags.set("lambda", format_real(*o.lambda));
    if (o.epochs && phase)
        flags.set(epochs_key(*phase), std::to_string(*o.epochs));
    if (!o.data_dir.empty())
        flags.set("data.dir", fs::absolute(o.data_dir).string());
    if (!o.from.empty())
        flags.set("from", fs::absolute(o.from).string());
    kv.merge(flags);
    return kv;
}

RunConfig resolve(const RunOptions& o, std::optional<Phase> phase)
{
    RunConfig c = RunConfig::from_config(resolve_kv(o, phase));
    if (c.data_dir.empty())
        throw ConfigError("no dataset directory: pass --data or set data.dir");
    return c;
}

void claim_outputs(const fs::path& dir, const std::vector<std::string>& names, bool overwrite)
{
    for (const auto& n : names)
        if (fs::exists(dir / n) && !overwrite)
            throw io::IoError((dir / n).string() + " exists (use --overwrite to replace it)");
    fs::create_directories(dir);
}

TrainingState load_state(const std::string& path)
{
    LoadedCheckpoint ck = load_checkpoint(path);
    return {std::move(ck.models), ck.head, ck.meta.phase, ck.meta.epoch};
}

void print_record(const MetricsRecord& r)
{
    auto f = [](const std::optional<double>& v) {
        char buf[32];
        if (!v)
            return std::string("-");
        std::snprintf(buf, sizeof buf, "%.4f", *v);
        return std::string(buf);
    };
    std::printf("epoch %3zu %-14s L_enc %s L_t1 %s L_t2 %s L_d %s L_dis %s | src_val %s tgt_val %s tgt_test %s\n",
                r.epoch, phase_name(r.phase), f(r.l_enc).c_str(), f(r.l_t1).c_str(), f(r.l_t2).c_str(),
                f(r.l_d).c_str(), f(r.l_dis).c_str(), f(r.src_val_acc).c_str(), f(r.tgt_val_acc).c_str(),
                f(r.tgt_test_acc).c_str());
    std::fflush(stdout);
}

void write_outputs(const fs::path& dir, const std::string& stem, const TrainingState& state, const RunConfig& cfg,
                   const std::vector<MetricsRecord>& records)
{
    save_checkpoint(state.models, {state.last_phase, state.epoch, cfg.seed, cfg.digest()}, state.head,
                    dir / (stem + ".ckpt"));
    io::write_file(dir / (stem + ".metrics.csv"), metrics_csv(records));
    io::write_file(dir / (stem + ".config"), cfg.to_config().serialize());
    std::printf("wrote %s/%s.{ckpt,metrics.csv,config}\n", dir.string().c_str(), stem.c_str());
}

// -------------------------------------------------------------- commands

int run_training(const RunOptions& o, Phase phase)
{
    const RunConfig cfg = resolve(o, phase);
    const std::string stem = phase_name(phase);
    const fs::path out(o.out_dir);
    claim_outputs(out, {stem + ".ckpt", stem + ".metrics.csv", stem + ".config"}, o.overwrite);

    const ExperimentData data = load_experiment_data(cfg.data_dir);
    TrainingState state =
        cfg.from_checkpoint.empty() ? TrainingState::fresh(cfg.seed, cfg.head) : load_state(cfg.from_checkpoint);
    PhaseConfig pc = cfg.phase(phase);
    pc.allow_phase_skip = !o.strict;

    const TrainingSets sets = training_sets(data, cfg);
    const EvalSets eval{&sets.source_validation, &data.target_validation, &data.target_test};
    PhaseResult result;
    switch (phase) {
    case Phase::pretrain: result = pretrain(state, sets.source_train, pc, eval, print_record); break;
    case Phase::domain_align:
        result = domain_align(state, sets.source_train, data.target_train, pc, eval, print_record);
        break;
    case Phase::decision_align:
        result = decision_align(state, sets.source_train, data.target_train, pc, eval, print_record);
        break;
    default: break;
    }
    if (result.converged)
        std::printf("converged after %zu epochs\n", result.epochs_run);
    write_outputs(out, stem, state, cfg, result.records);
    return kOk;
}

LabeledDataset labeled_target_train(const RunConfig& cfg, const std::string& sealed_path)
{
    const UnlabeledDataset unlabeled = load_unlabeled(fs::path(cfg.data_dir) / "target.train.mpds");
    return unseal(unlabeled, load_sealed(sealed_path));
}

std::string default_sealed(const RunConfig& cfg, const std::string& given)
{
    return given.empty() ? (fs::path(cfg.data_dir) / "target.train.sealed").string() : given;
}

void print_evaluation(const Evaluation& ev)
{
    auto conf = [](const Confusion& c) {
        return "tn " + std::to_string(c.tn) + " fp " + std::to_string(c.fp) + " fn " + std::to_string(c.fn) + " tp " +
               std::to_string(c.tp);
    };
    std::printf("classifier 1 accuracy: %.4f  (%s)\n", ev.accuracy1, conf(ev.confusion1).c_str());
    std::printf("classifier 2 accuracy: %.4f  (%s)\n", ev.accuracy2, conf(ev.confusion2).c_str());
    std::printf("average accuracy:      %.4f\n", ev.average);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Melt-pool domain adaptation: synthetic data, training phases and evaluation"};
    app.require_subcommand(1);

    // gen-synth
    std::string spec_file, synth_out;
    bool reference_counts = false, synth_overwrite = false;
    auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic source/target benchmark");
    gen->add_option("--spec", spec_file, "Synthetic spec file")->required();
    gen->add_option("--out", synth_out, "Output directory")->required();
    gen->add_flag("--reference-counts", reference_counts, "Use 323/323 source train, 5819 target train, 50/50 val and test");
    gen->add_flag("--overwrite", synth_overwrite, "Replace an existing output directory");

    // prepare
    std::string prep_input, prep_out, prep_domain = "source", prep_split = "train", prep_denoise = "none",
                                      prep_seal;
    bool prep_balance = false, prep_overwrite = false;
    std::size_t prep_side = kImageSide;
    std::uint64_t prep_seed = 1;
    auto* prep = app.add_subcommand("prepare", "Ingest an image directory, denoise, resize and store a container");
    prep->add_option("--input", prep_input, "Root with <split>/<normal|abnormal|unlabeled>/ images")->required();
    prep->add_option("--out", prep_out, "Output .mpds container")->required();
    prep->add_option("--domain", prep_domain, "source or target")->check(CLI::IsMember({"source", "target"}));
    prep->add_option("--split", prep_split, "train, validation or test")
        ->check(CLI::IsMember({"train", "validation", "test"}));
    prep->add_option("--denoise", prep_denoise, "none, median3 or threshold(t)");
    prep->add_option("--side", prep_side, "Output side length");
    prep->add_flag("--balance", prep_balance, "Downsample the majority class to the minority count");
    prep->add_option("--seed", prep_seed, "Seed for --balance");
    prep->add_option("--seal", prep_seal, "Write labels to this sealed file and store the set unlabeled");
    prep->add_flag("--overwrite", prep_overwrite, "Replace existing outputs");

    // augment
    RunOptions aug_opts;
    std::string aug_in, aug_out;
    auto* aug = app.add_subcommand("augment", "Apply the configured augmentation to a labeled container");
    add_config_flags(aug, aug_opts);
    aug->add_option("--in", aug_in, "Input .mpds (labeled)")->required();
    aug->add_option("--out", aug_out, "Output .mpds")->required();
    aug->add_flag("--overwrite", aug_opts.overwrite, "Replace existing outputs");

    // training phases
    RunOptions pre_opts, adapt_opts, dec_opts;
    auto* pre = app.add_subcommand("pretrain", "Phase 1: supervised pre-training on the augmented source set");
    add_training_flags(pre, pre_opts, false);
    auto* adapt = app.add_subcommand("adapt", "Phase 2: adversarial domain alignment");
    add_training_flags(adapt, adapt_opts, true);
    auto* dec = app.add_subcommand("decision-align", "Phase 3: decision alignment of the two task classifiers");
    add_training_flags(dec, dec_opts, true);

    // evaluate
    RunOptions eval_opts;
    std::string eval_split = "test", eval_domain = "target", eval_sealed;
    auto* ev = app.add_subcommand("evaluate", "Per-classifier and average accuracy of a checkpoint");
    add_config_flags(ev, eval_opts);
    ev->add_option("--from", eval_opts.from, "Checkpoint")->required();
    ev->add_option("--data", eval_opts.data_dir, "Directory with the .mpds dataset containers");
    ev->add_option("--split", eval_split, "train, validation or test")
        ->check(CLI::IsMember({"train", "validation", "test"}));
    ev->add_option("--domain", eval_domain, "source or target")->check(CLI::IsMember({"source", "target"}));
    ev->add_option("--sealed", eval_sealed, "Sealed answers for scoring the target train split");

    // finetune
    RunOptions ft_opts;
    std::string ft_sealed;
    std::optional<std::size_t> ft_examples;
    auto* ft = app.add_subcommand("finetune", "Supervised fine-tuning on a few labeled target examples");
    add_training_flags(ft, ft_opts, true);
    ft->add_option("--examples", ft_examples, "Number of labeled target examples");
    ft->add_option("--sealed", ft_sealed, "Sealed answer file providing the labels");

    // baseline
    RunOptions bl_opts;
    std::string bl_sealed;
    std::optional<std::size_t> bl_examples;
    auto* bl = app.add_subcommand("baseline", "Supervised-only model trained on n labeled target examples");
    add_config_flags(bl, bl_opts);
    bl->add_option("--data", bl_opts.data_dir, "Directory with the .mpds dataset containers");
    bl->add_option("--out", bl_opts.out_dir, "Output directory")->required();
    bl->add_option("--epochs", bl_opts.epochs, "Training epochs");
    bl->add_option("--examples", bl_examples, "Number of labeled target examples (>= 2)")->required();
    bl->add_option("--sealed", bl_sealed, "Sealed answer file providing the labels");
    bl->add_flag("--overwrite", bl_opts.overwrite, "Replace existing outputs");

    // embed
    RunOptions emb_opts;
    std::string emb_out;
    bool emb_project = false, emb_overwrite = false;
    auto* emb = app.add_subcommand("embed", "Export 20-d encodings of every example as CSV");
    add_config_flags(emb, emb_opts);
    emb->add_option("--from", emb_opts.from, "Checkpoint")->required();
    emb->add_option("--data", emb_opts.data_dir, "Directory with the .mpds dataset containers");
    emb->add_option("--out", emb_out, "Output CSV")->required();
    emb->add_flag("--project", emb_project, "Append the two leading principal components");
    emb->add_flag("--overwrite", emb_overwrite, "Replace existing outputs");

    // sweep-zoom
    RunOptions sw_opts;
    std::string sw_ranges, sw_out;
    std::size_t sw_trials = 3;
    auto* sw = app.add_subcommand("sweep-zoom", "Full pipeline per zoom range and trial seed");
    add_config_flags(sw, sw_opts);
    sw->add_option("--data", sw_opts.data_dir, "Directory with the .mpds dataset containers");
    sw->add_option("--ranges", sw_ranges, "Semicolon-separated lo,hi pairs, e.g. \"0.3,0.35;0.1,0.12\"")->required();
    sw->add_option("--trials", sw_trials, "Trials (seeds) per range")->check(CLI::PositiveNumber);
    sw->add_option("--out", sw_out, "Output CSV")->required();
    sw->add_flag("--overwrite", sw_opts.overwrite, "Replace existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) {
            const KeyValues kv = KeyValues::load(spec_file);
            const SyntheticBenchmarkSpec spec = SyntheticBenchmarkSpec::from_config(kv);
            if (fs::exists(synth_out) && !fs::is_empty(synth_out)) {
                if (!synth_overwrite)
                    throw io::IoError(synth_out + " is not empty (use --overwrite to replace it)");
                fs::remove_all(synth_out);
            }
            const SyntheticBenchmark bench = generate_domain_pair(spec.source, spec.target, reference_counts);
            write_benchmark(bench, synth_out);
            KeyValues resolved = spec.to_config();
            if (reference_counts) {
                SyntheticBenchmarkSpec counted = spec;
                apply_reference_counts(counted);
                resolved = counted.to_config();
            }
            io::write_file(fs::path(synth_out) / "synthetic.cfg", resolved.serialize());
            std::printf("source train %zu, target train %zu (unlabeled), validation %zu/%zu, test %zu/%zu\n",
                        bench.source_train.size(), bench.target_train.size(), bench.source_validation.size(),
                        bench.target_validation.size(), bench.source_test.size(), bench.target_test.size());
            return kOk;
        }
        if (*prep) {
            claim_outputs(fs::path(prep_out).parent_path().empty() ? fs::path(".") : fs::path(prep_out).parent_path(),
                          {fs::path(prep_out).filename().string()}, prep_overwrite);
            const DenoiseMethod denoise = DenoiseMethod::parse(prep_denoise);
            DomainDataset ds = load_image_dir(prep_input, parse_domain(prep_domain), parse_split(prep_split));
            std::visit([&](auto& d) { d.images = prepare(d.images, prep_side, denoise); }, ds);
            if (prep_balance) {
                if (!std::holds_alternative<LabeledDataset>(ds))
                    throw ContractError("--balance needs labeled data");
                ds = balance_downsample(std::get<LabeledDataset>(ds), prep_seed);
            }
            if (!prep_seal.empty()) {
                if (!std::holds_alternative<LabeledDataset>(ds))
                    throw ContractError("--seal needs labeled data");
                auto [unlabeled, sealed] = seal(std::get<LabeledDataset>(ds));
                save_sealed(sealed, prep_seal);
                ds = std::move(unlabeled);
            }
            save_dataset(ds, prep_out);
            std::visit([&](const auto& d) { std::printf("wrote %zu images to %s\n", d.size(), prep_out.c_str()); }, ds);
            return kOk;
        }
        if (*aug) {
            const RunConfig cfg = RunConfig::from_config(resolve_kv(aug_opts, std::nullopt));
            claim_outputs(fs::path(aug_out).parent_path().empty() ? fs::path(".") : fs::path(aug_out).parent_path(),
                          {fs::path(aug_out).filename().string()}, aug_opts.overwrite);
            AugmentationConfig a = cfg.aug;
            a.seed = substream_seed(cfg.seed, 0, 0x617567);
            const LabeledDataset out = augment_dataset(load_labeled(aug_in), a);
            save_dataset(out, aug_out);
            io::write_file(aug_out + ".config", cfg.to_config().serialize());
            const auto [lo, hi] = a.effective_zoom_range();
            std::printf("wrote %zu images to %s (zoom range %g..%g)\n", out.size(), aug_out.c_str(), lo, hi);
            return kOk;
        }
        if (*pre)
            return run_training(pre_opts, Phase::pretrain);
        if (*adapt)
            return run_training(adapt_opts, Phase::domain_align);
        if (*dec)
            return run_training(dec_opts, Phase::decision_align);
        if (*ev) {
            const RunConfig cfg = resolve(eval_opts, std::nullopt);
            TrainingState state = load_state(cfg.from_checkpoint);
            const std::string stem = std::string(eval_domain) + "." + eval_split;
            LabeledDataset ds;
            if (eval_domain == "target" && eval_split == "train")
                ds = labeled_target_train(cfg, default_sealed(cfg, eval_sealed));
            else
                ds = load_labeled(fs::path(cfg.data_dir) / (stem + ".mpds"));
            std::printf("%s split, %zu examples, checkpoint after '%s' (epoch %u)\n", stem.c_str(), ds.size(),
                        state.last_phase.c_str(), state.epoch);
            print_evaluation(evaluate(state.models, ds));
            return kOk;
        }
        if (*ft) {
            if (ft_examples)
                ft_opts.sets.push_back("finetune.examples=" + std::to_string(*ft_examples));
            const RunConfig cfg = resolve(ft_opts, Phase::finetune);
            const fs::path out(ft_opts.out_dir);
            claim_outputs(out, {"finetune.ckpt", "finetune.metrics.csv", "finetune.config"}, ft_opts.overwrite);
            TrainingState state = load_state(cfg.from_checkpoint);
            const LabeledDataset subset = balanced_subset(labeled_target_train(cfg, default_sealed(cfg, ft_sealed)),
                                                          cfg.finetune_examples, cfg.seed);
            const LabeledDataset tval = load_labeled(fs::path(cfg.data_dir) / "target.validation.mpds");
            const LabeledDataset ttest = load_labeled(fs::path(cfg.data_dir) / "target.test.mpds");
            PhaseConfig pc = cfg.phase(Phase::finetune);
            pc.allow_phase_skip = !ft_opts.strict;
            const PhaseResult r = finetune(state, subset, pc, {nullptr, &tval, &ttest}, print_record);
            write_outputs(out, "finetune", state, cfg, r.records);
            print_evaluation(evaluate(state.models, ttest));
            return kOk;
        }
        if (*bl) {
            bl_opts.sets.push_back("finetune.examples=" + std::to_string(std::max<std::size_t>(*bl_examples, 2)));
            const RunConfig cfg = resolve(bl_opts, Phase::baseline);
            if (*bl_examples < 2)
                throw ContractError("baseline needs at least 2 labeled examples");
            const fs::path out(bl_opts.out_dir);
            claim_outputs(out, {"baseline.metrics.csv", "baseline.config"}, bl_opts.overwrite);
            const LabeledDataset subset = balanced_subset(labeled_target_train(cfg, default_sealed(cfg, bl_sealed)),
                                                          *bl_examples, cfg.seed);
            const LabeledDataset ttest = load_labeled(fs::path(cfg.data_dir) / "target.test.mpds");
            const BaselineResult r = train_baseline(subset, ttest, cfg.phase(Phase::baseline), cfg.seed);
            io::write_file(out / "baseline.metrics.csv", metrics_csv(r.records));
            io::write_file(out / "baseline.config", cfg.to_config().serialize());
            std::printf("baseline with %zu labeled target examples: test accuracy %.4f\n", subset.size(),
                        r.test_accuracy);
            return kOk;
        }
        if (*emb) {
            const RunConfig cfg = resolve(emb_opts, std::nullopt);
            claim_outputs(fs::path(emb_out).parent_path().empty() ? fs::path(".") : fs::path(emb_out).parent_path(),
                          {fs::path(emb_out).filename().string()}, emb_overwrite);
            TrainingState state = load_state(cfg.from_checkpoint);
            std::vector<DomainDataset> sets;
            for (const char* stem : {"source.train", "source.validation", "source.test", "target.train",
                                     "target.validation", "target.test"})
                sets.push_back(load_dataset(fs::path(cfg.data_dir) / (std::string(stem) + ".mpds")));
            std::vector<const DomainDataset*> ptrs;
            for (const auto& s : sets)
                ptrs.push_back(&s);
            const EmbeddingTable table = export_embeddings(state.models, ptrs, emb_project);
            io::write_file(emb_out, table.csv());
            std::printf("wrote %zu rows to %s\n", table.rows.size(), emb_out.c_str());
            return kOk;
        }
        if (*sw) {
            const RunConfig base = resolve(sw_opts, std::nullopt);
            claim_outputs(fs::path(sw_out).parent_path().empty() ? fs::path(".") : fs::path(sw_out).parent_path(),
                          {fs::path(sw_out).filename().string()}, sw_opts.overwrite);
            std::vector<std::pair<double, double>> ranges;
            std::stringstream ss(sw_ranges);
            for (std::string item; std::getline(ss, item, ';');)
                ranges.push_back(parse_range(item));
            if (ranges.empty())
                throw ConfigError("--ranges: no ranges given");
            const ExperimentData data = load_experiment_data(base.data_dir);
            std::string csv = "range_lo,range_hi,trials,mean,min,max\n";
            for (const auto& [lo, hi] : ranges) {
                double sum = 0.0, mn = 1.0, mx = 0.0;
                for (std::size_t t = 0; t < sw_trials; ++t) {
                    RunConfig cfg = base;
                    cfg.seed = base.seed + t;
                    cfg.aug.zoom_override = std::make_pair(lo, hi);
                    const double acc = run_pipeline(data, cfg).after_decision.average;
                    std::printf("range %g,%g trial %zu: target test accuracy %.4f\n", lo, hi, t, acc);
                    std::fflush(stdout);
                    sum += acc;
                    mn = std::min(mn, acc);
                    mx = std::max(mx, acc);
                }
                csv += format_real(lo) + "," + format_real(hi) + "," + std::to_string(sw_trials) + "," +
                       format_real(sum / static_cast<double>(sw_trials)) + "," + format_real(mn) + "," +
                       format_real(mx) + "\n";
            }
            io::write_file(sw_out, csv);
            io::write_file(sw_out + ".config", base.to_config().serialize());
            std::printf("wrote %s\n", sw_out.c_str());
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kData;
    } catch (const io::IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const io::FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const IngestionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const PreparationError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const BalanceError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const ContractError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
        return kContract;
    } catch (const DimensionError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
        return kContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kOk;
}
