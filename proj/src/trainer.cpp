#include "mpda/trainer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <variant>

#include "mpda/config.hpp"
#include "mpda/random.hpp"

namespace mpda {

const char* phase_name(Phase phase)
{
    switch (phase) {
    case Phase::pretrain: return "pretrain";
    case Phase::domain_align: return "domain-align";
    case Phase::decision_align: return "decision-align";
    case Phase::finetune: return "finetune";
    case Phase::baseline: return "baseline";
    }
    return "?";
}

Phase parse_phase(const std::string& text)
{
    for (Phase p : {Phase::pretrain, Phase::domain_align, Phase::decision_align, Phase::finetune, Phase::baseline})
        if (text == phase_name(p))
            return p;
    throw ContractError("unknown phase '" + text + "'");
}

void PhaseConfig::validate() const
{
    const std::string where = std::string(phase_name(phase)) + ": ";
    if (!(lr.encoder > 0.0 && lr.task1 > 0.0 && lr.task2 > 0.0 && lr.domain > 0.0))
        throw ContractError(where + "learning rates must be positive");
    if (!(lambda >= 0.0))
        throw ContractError(where + "lambda must be non-negative");
    if (epochs == 0 && phase != Phase::finetune)
        throw ContractError(where + "epochs must be at least 1");
    if (batch_size < 2)
        throw ContractError(where + "batch size must be at least 2 (batchnorm)");
    if (convergence && (convergence->window == 0 || !(convergence->tolerance > 0.0)))
        throw ContractError(where + "convergence rule needs a positive tolerance and window");
}

// --------------------------------------------------------------- metrics

namespace {

std::string field(const std::optional<double>& v)
{
    return v ? format_real(*v) : std::string();
}

}  // namespace

std::string metrics_csv_row(const MetricsRecord& r)
{
    return std::to_string(r.epoch) + "," + phase_name(r.phase) + "," + field(r.l_enc) + "," + field(r.l_t1) + "," +
           field(r.l_t2) + "," + field(r.l_d) + "," + field(r.l_dis) + "," + field(r.src_val_acc) + "," +
           field(r.tgt_val_acc) + "," + field(r.tgt_test_acc);
}

std::string metrics_csv(const std::vector<MetricsRecord>& records)
{
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& r : records)
        out += metrics_csv_row(r) + "\n";
    return out;
}

TrainingState TrainingState::fresh(std::uint64_t seed, DomainHead head)
{
    return {ModelSet::build(seed, head), head, "init", 0};
}

// ------------------------------------------------------------ evaluation

namespace {

constexpr std::size_t kEvalChunk = 200;

void tally(Confusion& c, bool predicted, std::uint8_t label)
{
    if (label == kAbnormal)
        (predicted ? c.tp : c.fn)++;
    else
        (predicted ? c.fp : c.tn)++;
}

double accuracy(const Confusion& c)
{
    const auto total = c.tn + c.fp + c.fn + c.tp;
    return total == 0 ? 0.0 : static_cast<double>(c.tn + c.tp) / static_cast<double>(total);
}

template <typename Fn>
void for_chunks(std::size_t n, Fn fn)
{
    for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
        std::vector<std::size_t> idx(std::min(kEvalChunk, n - begin));
        for (std::size_t k = 0; k < idx.size(); ++k)
            idx[k] = begin + k;
        fn(idx);
    }
}

}  // namespace

Evaluation evaluate(ModelSet& models, const LabeledDataset& dataset)
{
    dataset.validate();
    if (dataset.size() == 0)
        throw ContractError("evaluate: empty dataset");
    Evaluation ev;
    for_chunks(dataset.size(), [&](const std::vector<std::size_t>& idx) {
        const Tensor f = models.encoder.forward(stack_images(dataset.images, idx), Mode::eval);
        const Tensor p1 = models.task1.forward(f, Mode::eval);
        const Tensor p2 = models.task2.forward(f, Mode::eval);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            tally(ev.confusion1, p1[k] >= 0.5f, dataset.labels[idx[k]]);
            tally(ev.confusion2, p2[k] >= 0.5f, dataset.labels[idx[k]]);
        }
    });
    ev.accuracy1 = accuracy(ev.confusion1);
    ev.accuracy2 = accuracy(ev.confusion2);
    ev.average = 0.5 * (ev.accuracy1 + ev.accuracy2);
    return ev;
}

Evaluation evaluate(ModelSet& models, const DomainDataset& dataset)
{
    if (!std::holds_alternative<LabeledDataset>(dataset))
        throw ContractError("evaluate: dataset is unlabeled");
    return evaluate(models, std::get<LabeledDataset>(dataset));
}

// ------------------------------------------------------------ phase loop

namespace {

struct StepLosses {
    std::optional<double> l_enc, l_t1, l_t2, l_d, l_dis;
};

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;
    void add(const std::optional<double>& v)
    {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    std::optional<double> get() const
    {
        return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
    }
};

void check_order(const TrainingState& state, const PhaseConfig& config, std::initializer_list<const char*> allowed)
{
    for (const char* a : allowed)
        if (state.last_phase == a)
            return;
    std::string msg = std::string(phase_name(config.phase)) + " expects a model after";
    for (const char* a : allowed)
        msg += std::string(" '") + a + "'";
    msg += ", got '" + state.last_phase + "'";
    if (!config.allow_phase_skip)
        throw ContractError(msg);
    std::cerr << "warning: " << msg << "\n";
}

std::optional<double> monitored(const MetricsRecord& r)
{
    switch (r.phase) {
    case Phase::domain_align: return r.l_d;
    case Phase::decision_align: return r.l_dis;
    default: return r.l_enc;
    }
}

bool has_converged(const std::vector<MetricsRecord>& records, const ConvergenceRule& rule)
{
    if (records.size() < rule.window + 1)
        return false;
    for (std::size_t k = records.size() - rule.window; k < records.size(); ++k) {
        const auto prev = monitored(records[k - 1]), cur = monitored(records[k]);
        if (!prev || !cur)
            return false;
        const double rel = std::abs(*cur - *prev) / std::max(std::abs(*prev), 1e-12);
        if (!(rel < rule.tolerance))
            return false;
    }
    return true;
}

void score(ModelSet& models, const EvalSets& eval, MetricsRecord& r)
{
    if (eval.source_validation)
        r.src_val_acc = evaluate(models, *eval.source_validation).average;
    if (eval.target_validation)
        r.tgt_val_acc = evaluate(models, *eval.target_validation).average;
    if (eval.target_test)
        r.tgt_test_acc = evaluate(models, *eval.target_test).average;
}

template <typename Step>
PhaseResult run_phase(TrainingState& state, const PhaseConfig& config, const BatchPlan& plan, const EvalSets& eval,
                      const EpochCallback& on_epoch, Step step)
{
    PhaseResult result;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        Mean enc, t1, t2, d, dis;
        for (const Batch& b : plan.epoch(e)) {
            const StepLosses l = step(b);
            enc.add(l.l_enc);
            t1.add(l.l_t1);
            t2.add(l.l_t2);
            d.add(l.l_d);
            dis.add(l.l_dis);
        }
        MetricsRecord r;
        r.epoch = ++state.epoch;
        r.phase = config.phase;
        r.l_enc = enc.get();
        r.l_t1 = t1.get();
        r.l_t2 = t2.get();
        r.l_d = d.get();
        r.l_dis = dis.get();
        score(state.models, eval, r);
        result.records.push_back(r);
        ++result.epochs_run;
        if (on_epoch)
            on_epoch(r);
        if (config.convergence && has_converged(result.records, *config.convergence)) {
            result.converged = true;
            break;
        }
    }
    state.last_phase = phase_name(config.phase);
    return result;
}

void add_scaled(Tensor& into, const Tensor& g, float scale = 1.0f)
{
    for (std::size_t i = 0; i < into.numel(); ++i)
        into[i] += scale * g[i];
}

// Gradient for the first `rows` rows of a [N,F] tensor, zeros after.
Tensor pad_rows(const Tensor& top, std::size_t total_rows)
{
    Tensor out({total_rows, top.shape()[1]});
    std::copy(top.data().begin(), top.data().end(), out.data().begin());
    return out;
}

// Supervised step shared by pretraining and fine-tuning.
StepLosses supervised_step(ModelSet& m, const Tensor& x, const Tensor& y, const PhaseConfig& c)
{
    const Tensor f = m.encoder.forward(x, Mode::train);
    Tensor g1, g2;
    const LossValue l1 = bce(m.task1.forward(f, Mode::train), y, &g1, LossKind::task1);
    const LossValue l2 = bce(m.task2.forward(f, Mode::train), y, &g2, LossKind::task2);
    Tensor gf = m.task1.backward(g1);
    add_scaled(gf, m.task2.backward(g2));
    m.encoder.backward(gf);
    m.task1.adam_step(c.lr.task1);
    m.task2.adam_step(c.lr.task2);
    m.encoder.adam_step(c.lr.encoder);
    const LossValue enc = encoder_loss(l1, l2, std::nullopt, c.lambda);
    return {enc.value, l1.value, l2.value, std::nullopt, std::nullopt};
}

std::uint64_t plan_seed(const PhaseConfig& c)
{
    return substream_seed(c.seed, static_cast<std::uint64_t>(c.phase), 0x706c616e);
}

}  // namespace

// ---------------------------------------------------------------- phases

PhaseResult pretrain(TrainingState& state, const LabeledDataset& source, const PhaseConfig& config,
                     const EvalSets& eval, const EpochCallback& on_epoch)
{
    config.validate();
    source.validate(kImageSide);
    check_order(state, config, {"init", "pretrain"});
    const BatchPlan plan(source.size(), config.batch_size, plan_seed(config));
    return run_phase(state, config, plan, eval, on_epoch, [&](const Batch& b) {
        return supervised_step(state.models, stack_images(source.images, b.source),
                               stack_labels(source.labels, b.source), config);
    });
}

PhaseResult pretrain(TrainingState& state, const DomainDataset& source, const PhaseConfig& config,
                     const EvalSets& eval, const EpochCallback& on_epoch)
{
    if (!std::holds_alternative<LabeledDataset>(source))
        throw ContractError("pretrain: source training data must be labeled");
    return pretrain(state, std::get<LabeledDataset>(source), config, eval, on_epoch);
}

PhaseResult domain_align(TrainingState& state, const LabeledDataset& source, const UnlabeledDataset& target,
                         const PhaseConfig& config, const EvalSets& eval, const EpochCallback& on_epoch)
{
    config.validate();
    source.validate(kImageSide);
    target.validate(kImageSide);
    check_order(state, config, {"pretrain", "domain-align"});
    const BatchPlan plan(source.size(), target.size(), config.batch_size, plan_seed(config));
    ModelSet& m = state.models;
    const float lambda = static_cast<float>(config.lambda);
    return run_phase(state, config, plan, eval, on_epoch, [&](const Batch& b) {
        const std::size_t ns = b.source.size(), nt = b.target.size();
        const Tensor ys = stack_labels(source.labels, b.source);
        const Tensor f = m.encoder.forward(
            Tensor::concat_rows(stack_images(source.images, b.source), stack_images(target.images, b.target)),
            Mode::train);
        const Tensor fs = f.slice_rows(0, ns);

        // (1) domain classifier descends L_d
        auto domain_grad = [&](LossValue* out) {
            const Tensor d = m.domain.forward(f, Mode::train);
            Tensor gs, gt;
            *out = domain_loss(d.slice_rows(0, ns), d.slice_rows(ns, ns + nt), &gs, &gt);
            return m.domain.backward(Tensor::concat_rows(gs, gt));
        };
        LossValue ld;
        domain_grad(&ld);
        m.domain.adam_step(config.lr.domain);

        // (2) task heads descend their source losses
        Tensor g1, g2;
        const LossValue l1 = bce(m.task1.forward(fs, Mode::train), ys, &g1, LossKind::task1);
        const LossValue l2 = bce(m.task2.forward(fs, Mode::train), ys, &g2, LossKind::task2);
        m.task1.backward(g1);
        m.task2.backward(g2);
        m.task1.adam_step(config.lr.task1);
        m.task2.adam_step(config.lr.task2);

        // (3) encoder descends L_t1 + L_t2 - lambda L_d through the updated heads
        bce(m.task1.forward(fs, Mode::train), ys, &g1);
        bce(m.task2.forward(fs, Mode::train), ys, &g2);
        Tensor gfs = m.task1.backward(g1);
        add_scaled(gfs, m.task2.backward(g2));
        Tensor gf = pad_rows(gfs, ns + nt);
        LossValue ld_after;
        add_scaled(gf, domain_grad(&ld_after), -lambda);
        for (Network* head : {&m.task1, &m.task2, &m.domain})
            head->zero_grad();
        m.encoder.backward(gf);
        m.encoder.adam_step(config.lr.encoder);

        const LossValue enc = encoder_loss(l1, l2, ld, config.lambda);
        return StepLosses{enc.value, l1.value, l2.value, ld.value, std::nullopt};
    });
}

PhaseResult decision_align(TrainingState& state, const LabeledDataset& source, const UnlabeledDataset& target,
                           const PhaseConfig& config, const EvalSets& eval, const EpochCallback& on_epoch)
{
    config.validate();
    source.validate(kImageSide);
    target.validate(kImageSide);
    check_order(state, config, {"domain-align", "decision-align"});
    const BatchPlan plan(source.size(), target.size(), config.batch_size, plan_seed(config));
    ModelSet& m = state.models;
    return run_phase(state, config, plan, eval, on_epoch, [&](const Batch& b) {
        const std::size_t ns = b.source.size(), nt = b.target.size();
        const Tensor ys = stack_labels(source.labels, b.source);
        const Tensor f = m.encoder.forward(
            Tensor::concat_rows(stack_images(source.images, b.source), stack_images(target.images, b.target)),
            Mode::train);
        const Tensor p1 = m.task1.forward(f, Mode::train);
        const Tensor p2 = m.task2.forward(f, Mode::train);

        Tensor g1s, g2s, g1t, g2t;
        const LossValue l1 = bce(p1.slice_rows(0, ns), ys, &g1s, LossKind::task1);
        const LossValue l2 = bce(p2.slice_rows(0, ns), ys, &g2s, LossKind::task2);
        const LossValue ldis =
            discrepancy_loss(p1.slice_rows(ns, ns + nt), p2.slice_rows(ns, ns + nt), config.metric, &g1t, &g2t);

        // Heads are per-example maps, so the source rows of their input
        // gradients carry only the task-loss terms; the target rows, which
        // carry L_dis, are dropped before reaching the encoder.
        Tensor gf = m.task1.backward(Tensor::concat_rows(g1s, g1t)).slice_rows(0, ns);
        add_scaled(gf, m.task2.backward(Tensor::concat_rows(g2s, g2t)).slice_rows(0, ns));
        m.task1.adam_step(config.lr.task1);
        m.task2.adam_step(config.lr.task2);
        m.encoder.backward(pad_rows(gf, ns + nt));
        m.encoder.adam_step(config.lr.encoder);

        const LossValue enc = encoder_loss(l1, l2, std::nullopt, config.lambda);
        return StepLosses{enc.value, l1.value, l2.value, std::nullopt, ldis.value};
    });
}

PhaseResult finetune(TrainingState& state, const LabeledDataset& target_subset, const PhaseConfig& config,
                     const EvalSets& eval, const EpochCallback& on_epoch)
{
    config.validate();
    if (target_subset.size() == 0)
        throw ContractError("finetune: empty labeled subset");
    target_subset.validate(kImageSide);
    check_order(state, config, {"domain-align", "decision-align", "finetune"});
    if (config.epochs == 0) {
        state.last_phase = phase_name(config.phase);
        return {};
    }
    if (target_subset.size() < 2)
        throw ContractError("finetune: need at least 2 labeled examples (batchnorm)");
    const BatchPlan plan(target_subset.size(), std::min(config.batch_size, target_subset.size()), plan_seed(config));
    return run_phase(state, config, plan, eval, on_epoch, [&](const Batch& b) {
        return supervised_step(state.models, stack_images(target_subset.images, b.source),
                               stack_labels(target_subset.labels, b.source), config);
    });
}

BaselineResult train_baseline(const LabeledDataset& subset, const LabeledDataset& test, const PhaseConfig& config,
                              std::uint64_t model_seed)
{
    config.validate();
    subset.validate(kImageSide);
    if (subset.size() < 2)
        throw ContractError("train_baseline: need at least 2 labeled examples (batchnorm)");
    Network encoder = build_encoder(substream_seed(model_seed, 0, 0x6e6574));
    Network head = build_task_classifier(substream_seed(model_seed, 1, 0x6e6574));
    const BatchPlan plan(subset.size(), std::min(config.batch_size, subset.size()), plan_seed(config));

    auto accuracy_on = [&](const LabeledDataset& ds) {
        Confusion c;
        for_chunks(ds.size(), [&](const std::vector<std::size_t>& idx) {
            const Tensor p = head.forward(encoder.forward(stack_images(ds.images, idx), Mode::eval), Mode::eval);
            for (std::size_t k = 0; k < idx.size(); ++k)
                tally(c, p[k] >= 0.5f, ds.labels[idx[k]]);
        });
        return accuracy(c);
    };

    BaselineResult result;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        Mean loss;
        for (const Batch& b : plan.epoch(e)) {
            Tensor g;
            const Tensor f = encoder.forward(stack_images(subset.images, b.source), Mode::train);
            const LossValue l = bce(head.forward(f, Mode::train), stack_labels(subset.labels, b.source), &g);
            encoder.backward(head.backward(g));
            head.adam_step(config.lr.task1);
            encoder.adam_step(config.lr.encoder);
            loss.add(l.value);
        }
        MetricsRecord r;
        r.epoch = e + 1;
        r.phase = Phase::baseline;
        r.l_t1 = loss.get();
        r.l_enc = loss.get();
        r.tgt_test_acc = accuracy_on(test);
        result.records.push_back(r);
    }
    result.test_accuracy = accuracy_on(test);
    return result;
}

LossBreakdown loss_breakdown(const ModelSet& models, const Tensor& source_images, const Tensor& source_labels,
                             const Tensor& target_images, double lambda, DiscrepancyMetric metric)
{
    ModelSet m = models;
    const std::size_t ns = source_images.shape()[0], nt = target_images.shape()[0];
    const Tensor f = m.encoder.forward(Tensor::concat_rows(source_images, target_images), Mode::train);
    const Tensor p1 = m.task1.forward(f, Mode::train), p2 = m.task2.forward(f, Mode::train);
    const Tensor d = m.domain.forward(f, Mode::train);
    LossBreakdown out;
    const LossValue l1 = bce(p1.slice_rows(0, ns), source_labels, static_cast<Tensor*>(nullptr), LossKind::task1);
    const LossValue l2 = bce(p2.slice_rows(0, ns), source_labels, static_cast<Tensor*>(nullptr), LossKind::task2);
    const LossValue ld = domain_loss(d.slice_rows(0, ns), d.slice_rows(ns, ns + nt));
    out.l_t1 = l1.value;
    out.l_t2 = l2.value;
    out.l_d = ld.value;
    out.l_dis = discrepancy_loss(p1.slice_rows(ns, ns + nt), p2.slice_rows(ns, ns + nt), metric).value;
    out.l_enc_pretrain = encoder_loss(l1, l2, std::nullopt, lambda).value;
    out.l_enc_adapt = encoder_loss(l1, l2, ld, lambda).value;
    return out;
}

// ------------------------------------------------------------- embeddings

std::string EmbeddingTable::csv() const
{
    std::string out;
    for (std::size_t j = 0; j < kEmbeddingDim; ++j)
        out += "e" + std::to_string(j) + ",";
    out += "domain,label,split";
    if (!projection.empty())
        out += ",pc0,pc1";
    out += "\n";
    char buf[64];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (float v : rows[i]) {
            std::snprintf(buf, sizeof buf, "%.9g,", static_cast<double>(v));
            out += buf;
        }
        out += std::string(domain_name(domains[i])) + "," + (labels[i] ? std::to_string(*labels[i]) : "") + "," +
               split_name(splits[i]);
        if (!projection.empty()) {
            std::snprintf(buf, sizeof buf, ",%.9g,%.9g", projection[i][0], projection[i][1]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

EmbeddingTable export_embeddings(ModelSet& models, const std::vector<const DomainDataset*>& datasets, bool project)
{
    EmbeddingTable table;
    for (const DomainDataset* ds : datasets) {
        std::visit(
            [&](const auto& d) {
                for_chunks(d.size(), [&](const std::vector<std::size_t>& idx) {
                    const Tensor f = models.encoder.forward(stack_images(d.images, idx), Mode::eval);
                    for (std::size_t k = 0; k < idx.size(); ++k) {
                        std::array<float, kEmbeddingDim> row;
                        std::copy_n(f.ptr() + k * kEmbeddingDim, kEmbeddingDim, row.begin());
                        table.rows.push_back(row);
                        table.domains.push_back(d.domain);
                        table.splits.push_back(d.split);
                        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, LabeledDataset>)
                            table.labels.emplace_back(d.labels[idx[k]]);
                        else
                            table.labels.emplace_back(std::nullopt);
                    }
                });
            },
            *ds);
    }
    if (project && table.rows.size() >= 2) {
        const auto n = static_cast<Eigen::Index>(table.rows.size());
        Eigen::MatrixXd x(n, static_cast<Eigen::Index>(kEmbeddingDim));
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::size_t j = 0; j < kEmbeddingDim; ++j)
                x(i, static_cast<Eigen::Index>(j)) = table.rows[static_cast<std::size_t>(i)][j];
        x.rowwise() -= x.colwise().mean();
        const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        Eigen::MatrixXd axes(static_cast<Eigen::Index>(kEmbeddingDim), 2);
        for (int k = 0; k < 2; ++k) {
            // Eigenvalues ascend; pin each axis's sign by its largest entry.
            Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(kEmbeddingDim) - 1 - k);
            Eigen::Index arg;
            v.cwiseAbs().maxCoeff(&arg);
            if (v(arg) < 0)
                v = -v;
            axes.col(k) = v;
        }
        const Eigen::MatrixXd proj = x * axes;
        for (Eigen::Index i = 0; i < n; ++i)
            table.projection.push_back({proj(i, 0), proj(i, 1)});
    }
    return table;
}

}  // namespace mpda
