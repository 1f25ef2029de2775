#pragma once

#include <optional>
#include <string>
#include <utility>

#include "mpda/tensor.hpp"

namespace mpda {

/// Which training objective a scalar belongs to.
enum class LossKind { task1, task2, domain, discrepancy, encoder, task1_prime, task2_prime };

const char* loss_kind_name(LossKind kind);

struct LossValue {
    double value = 0.0;
    LossKind kind = LossKind::task1;
};

enum class DiscrepancyMetric { symmetric_bce, l1 };

DiscrepancyMetric parse_discrepancy_metric(const std::string& text);
const char* discrepancy_metric_name(DiscrepancyMetric metric);

// All losses take [N,1] sigmoid outputs and, when a gradient pointer is
// given, write dLoss/dPrediction into it (same shape as the predictions).

/// mean_i -[y ln p + (1-y) ln(1-p)], labels must be exactly 0 or 1.
template <typename T>
LossValue bce(const BasicTensor<T>& predictions, const BasicTensor<T>& labels, BasicTensor<T>* grad = nullptr,
              LossKind kind = LossKind::task1);

/// mean[-ln(1 - d_src)] + mean[-ln d_tgt]: source is labelled 0, target 1.
template <typename T>
LossValue domain_loss(const BasicTensor<T>& d_src, const BasicTensor<T>& d_tgt, BasicTensor<T>* grad_src = nullptr,
                      BasicTensor<T>* grad_tgt = nullptr);

/// L_t1 + L_t2, minus lambda * L_d when the domain term is present.
LossValue encoder_loss(const LossValue& l_t1, const LossValue& l_t2, const std::optional<LossValue>& l_d,
                       double lambda);

/// Disagreement between the two task heads on the same (target) examples.
template <typename T>
LossValue discrepancy_loss(const BasicTensor<T>& p1, const BasicTensor<T>& p2, DiscrepancyMetric metric,
                           BasicTensor<T>* grad1 = nullptr, BasicTensor<T>* grad2 = nullptr);

/// (L_t1 + L_dis, L_t2 + L_dis)
std::pair<LossValue, LossValue> classifier_losses_phase3(const LossValue& l_t1, const LossValue& l_t2,
                                                         const LossValue& l_dis);

}  // namespace mpda
