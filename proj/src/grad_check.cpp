#include "mpda/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mpda/random.hpp"

namespace mpda {

double relative_error(double analytic, double numeric)
{
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

namespace {

template <typename T>
double scalar_loss(GradCheckProblem<T>& problem)
{
    const BasicTensor<T> value = problem.loss();
    if (value.numel() != 1)
        throw ContractError("grad_check: loss head must be scalar, got shape " + shape_str(value.shape()));
    return static_cast<double>(value[0]);
}

}  // namespace

template <typename T>
GradCheckReport grad_check(GradCheckProblem<T>& problem, const GradCheckOptions& options)
{
    GradCheckReport report;
    report.tolerance = options.tolerance;

    scalar_loss(problem);
    const std::uint64_t base_pattern = problem.activation_pattern ? problem.activation_pattern() : 0;
    problem.backward();

    // Snapshot analytic gradients before any perturbed forward overwrites caches.
    std::vector<std::vector<T>> analytic;
    analytic.reserve(problem.buffers.size());
    for (const auto& b : problem.buffers) {
        if (!b.values || !b.grads || b.grads->size() != b.values->size())
            throw ContractError("grad_check: buffer '" + b.name + "' has no gradient after backward");
        analytic.push_back(*b.grads);
    }

    Rng rng(options.seed);
    for (std::size_t bi = 0; bi < problem.buffers.size(); ++bi) {
        auto& buffer = problem.buffers[bi];
        std::vector<std::size_t> coords(buffer.values->size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (options.max_probes_per_buffer && coords.size() > options.max_probes_per_buffer) {
            rng.shuffle(coords.begin(), coords.end());
            coords.resize(options.max_probes_per_buffer);
        }
        for (std::size_t idx : coords) {
            T& v = (*buffer.values)[idx];
            const T original = v;
            v = original + static_cast<T>(options.step);
            const double plus = scalar_loss(problem);
            const bool kink_plus = problem.activation_pattern && problem.activation_pattern() != base_pattern;
            v = original - static_cast<T>(options.step);
            const double minus = scalar_loss(problem);
            const bool kink_minus = problem.activation_pattern && problem.activation_pattern() != base_pattern;
            v = original;
            if (kink_plus || kink_minus) {
                ++report.skipped_kinks;
                continue;
            }
            const double numeric = (plus - minus) / (2.0 * options.step);
            const double err = relative_error(static_cast<double>(analytic[bi][idx]), numeric);
            ++report.checked;
            if (err > report.max_relative_error || report.worst_location.empty()) {
                report.max_relative_error = std::max(report.max_relative_error, err);
                if (err >= report.max_relative_error)
                    report.worst_location = buffer.name + "[" + std::to_string(idx) + "]";
            }
        }
    }
    // Leave the fragment's caches consistent with unperturbed values.
    scalar_loss(problem);
    return report;
}

template GradCheckReport grad_check(GradCheckProblem<float>&, const GradCheckOptions&);
template GradCheckReport grad_check(GradCheckProblem<double>&, const GradCheckOptions&);

}  // namespace mpda
