#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpda/tensor.hpp"

namespace mpda {

/// One differentiable buffer: its values are perturbed in place, its analytic
/// gradient is read after `backward` has run.
template <typename T>
struct GradBuffer {
    std::string name;
    std::vector<T>* values = nullptr;
    const std::vector<T>* grads = nullptr;
};

/// A network fragment with a scalar loss head attached.
template <typename T>
struct GradCheckProblem {
    /// Runs the forward pass; must return a single-element tensor.
    std::function<BasicTensor<T>()> loss;
    /// Clears and recomputes analytic gradients from the most recent forward pass.
    std::function<void()> backward;
    std::vector<GradBuffer<T>> buffers;
    /// Optional signature of the piecewise-linear branch taken by the last
    /// forward (ReLU masks, pool winners, sigmoid clamps). Probes whose +h or
    /// -h forward lands on a different branch are skipped, since the central
    /// difference straddles a kink there.
    std::function<std::uint64_t()> activation_pattern;
};

struct GradCheckOptions {
    double step = 1e-3;
    double tolerance = 1e-3;
    /// 0 checks every coordinate; otherwise a seeded sample per buffer.
    std::size_t max_probes_per_buffer = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst_location;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
    double tolerance = 0.0;

    bool passed() const { return checked > 0 && max_relative_error <= tolerance; }
};

/// |a-b| / max(|a|, |b|, 1e-6)
double relative_error(double analytic, double numeric);

/// Compares analytic gradients to central finite differences.
/// Throws ContractError when the loss is not scalar.
template <typename T>
GradCheckReport grad_check(GradCheckProblem<T>& problem, const GradCheckOptions& options = {});

}  // namespace mpda
