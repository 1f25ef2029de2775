#include "mpda/losses.hpp"

#include <cmath>

namespace mpda {

const char* loss_kind_name(LossKind kind)
{
    switch (kind) {
    case LossKind::task1: return "L_t1";
    case LossKind::task2: return "L_t2";
    case LossKind::domain: return "L_d";
    case LossKind::discrepancy: return "L_dis";
    case LossKind::encoder: return "L_enc";
    case LossKind::task1_prime: return "L'_t1";
    case LossKind::task2_prime: return "L'_t2";
    }
    return "?";
}

DiscrepancyMetric parse_discrepancy_metric(const std::string& text)
{
    if (text == "symmetric-bce")
        return DiscrepancyMetric::symmetric_bce;
    if (text == "l1")
        return DiscrepancyMetric::l1;
    throw ContractError("unknown discrepancy metric '" + text + "' (expected symmetric-bce or l1)");
}

const char* discrepancy_metric_name(DiscrepancyMetric metric)
{
    return metric == DiscrepancyMetric::l1 ? "l1" : "symmetric-bce";
}

namespace {

template <typename T>
void expect_column(const BasicTensor<T>& t, const char* what)
{
    if (t.dim() != 2 || t.shape()[1] != 1)
        throw DimensionError(std::string(what) + ": expected [N,1] predictions, got " + shape_str(t.shape()));
}

}  // namespace

template <typename T>
LossValue bce(const BasicTensor<T>& predictions, const BasicTensor<T>& labels, BasicTensor<T>* grad, LossKind kind)
{
    expect_column(predictions, "bce");
    if (labels.numel() != predictions.numel())
        throw ContractError("bce: " + std::to_string(labels.numel()) + " labels for " +
                            std::to_string(predictions.numel()) + " predictions");
    const std::size_t n = predictions.numel();
    if (grad)
        *grad = BasicTensor<T>(predictions.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T y = labels[i];
        if (y != T(0) && y != T(1))
            throw ContractError("bce: label " + std::to_string(static_cast<double>(y)) + " is not 0 or 1");
        const T p = predictions[i];
        total += y == T(1) ? -std::log(static_cast<double>(p)) : -std::log1p(-static_cast<double>(p));
        if (grad)
            (*grad)[i] = (y == T(1) ? -T(1) / p : T(1) / (T(1) - p)) / static_cast<T>(n);
    }
    return {total / static_cast<double>(n), kind};
}

template <typename T>
LossValue domain_loss(const BasicTensor<T>& d_src, const BasicTensor<T>& d_tgt, BasicTensor<T>* grad_src,
                      BasicTensor<T>* grad_tgt)
{
    if (d_src.empty() || d_tgt.empty())
        throw ContractError("domain_loss: empty source or target batch");
    expect_column(d_src, "domain_loss (source)");
    expect_column(d_tgt, "domain_loss (target)");
    const T ns = static_cast<T>(d_src.numel()), nt = static_cast<T>(d_tgt.numel());
    double src = 0.0, tgt = 0.0;
    if (grad_src)
        *grad_src = BasicTensor<T>(d_src.shape());
    if (grad_tgt)
        *grad_tgt = BasicTensor<T>(d_tgt.shape());
    for (std::size_t i = 0; i < d_src.numel(); ++i) {
        src += -std::log1p(-static_cast<double>(d_src[i]));
        if (grad_src)
            (*grad_src)[i] = T(1) / (T(1) - d_src[i]) / ns;
    }
    for (std::size_t i = 0; i < d_tgt.numel(); ++i) {
        tgt += -std::log(static_cast<double>(d_tgt[i]));
        if (grad_tgt)
            (*grad_tgt)[i] = -T(1) / d_tgt[i] / nt;
    }
    return {src / static_cast<double>(ns) + tgt / static_cast<double>(nt), LossKind::domain};
}

LossValue encoder_loss(const LossValue& l_t1, const LossValue& l_t2, const std::optional<LossValue>& l_d,
                       double lambda)
{
    if (!(lambda >= 0.0))
        throw ContractError("encoder_loss: trade-off factor must be non-negative, got " + std::to_string(lambda));
    double value = l_t1.value + l_t2.value;
    if (l_d)
        value -= lambda * l_d->value;
    return {value, LossKind::encoder};
}

template <typename T>
LossValue discrepancy_loss(const BasicTensor<T>& p1, const BasicTensor<T>& p2, DiscrepancyMetric metric,
                           BasicTensor<T>* grad1, BasicTensor<T>* grad2)
{
    if (p1.numel() != p2.numel())
        throw ContractError("discrepancy_loss: length mismatch " + std::to_string(p1.numel()) + " vs " +
                            std::to_string(p2.numel()));
    if (p1.empty())
        throw ContractError("discrepancy_loss: empty batch");
    expect_column(p1, "discrepancy_loss");
    expect_column(p2, "discrepancy_loss");
    const std::size_t n = p1.numel();
    const T inv_n = T(1) / static_cast<T>(n);
    if (grad1)
        *grad1 = BasicTensor<T>(p1.shape());
    if (grad2)
        *grad2 = BasicTensor<T>(p2.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T a = p1[i], b = p2[i];
        if (metric == DiscrepancyMetric::l1) {
            total += std::abs(static_cast<double>(a) - static_cast<double>(b));
            const T s = a > b ? T(1) : a < b ? T(-1) : T(0);
            if (grad1)
                (*grad1)[i] = s * inv_n;
            if (grad2)
                (*grad2)[i] = -s * inv_n;
            continue;
        }
        const double la = std::log(static_cast<double>(a)), l1a = std::log1p(-static_cast<double>(a));
        const double lb = std::log(static_cast<double>(b)), l1b = std::log1p(-static_cast<double>(b));
        const double ce_ba = -static_cast<double>(b) * la - (1.0 - static_cast<double>(b)) * l1a;
        const double ce_ab = -static_cast<double>(a) * lb - (1.0 - static_cast<double>(a)) * l1b;
        total += 0.5 * (ce_ba + ce_ab);
        if (grad1)
            (*grad1)[i] = static_cast<T>(0.5 * ((-b / a + (T(1) - b) / (T(1) - a)) + (-lb + l1b))) * inv_n;
        if (grad2)
            (*grad2)[i] = static_cast<T>(0.5 * ((-a / b + (T(1) - a) / (T(1) - b)) + (-la + l1a))) * inv_n;
    }
    return {total / static_cast<double>(n), LossKind::discrepancy};
}

std::pair<LossValue, LossValue> classifier_losses_phase3(const LossValue& l_t1, const LossValue& l_t2,
                                                         const LossValue& l_dis)
{
    return {{l_t1.value + l_dis.value, LossKind::task1_prime}, {l_t2.value + l_dis.value, LossKind::task2_prime}};
}

#define MPDA_INSTANTIATE_LOSSES(T)                                                                         \
    template LossValue bce(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>*, LossKind);       \
    template LossValue domain_loss(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>*,          \
                                   BasicTensor<T>*);                                                     \
    template LossValue discrepancy_loss(const BasicTensor<T>&, const BasicTensor<T>&, DiscrepancyMetric,   \
                                        BasicTensor<T>*, BasicTensor<T>*);

MPDA_INSTANTIATE_LOSSES(float)
MPDA_INSTANTIATE_LOSSES(double)

}  // namespace mpda
