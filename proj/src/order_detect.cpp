#include "eqf/order_detect.hpp"

#include "eqf/patch.hpp"
#include "eqf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eqf::order {
namespace {

double draw(const ProbeSpec& probe, std::uint64_t base, std::uint64_t slot, std::uint64_t lane) {
    return probe.lo + (probe.hi - probe.lo) * uniform01({probe.seed, base, slot}, lane);
}

} // namespace

CoordinateVariance coordinate_variance(const BlackBoxFunction& f, int index, const ProbeSpec& probe,
                                       long long& budget_used) {
    const int pos = index - f.first_index;
    if (pos < 0 || pos >= f.arity) throw Error(ErrorCode::invalid_argument, "coordinate index out of range");
    if (probe.n_base < 1 || probe.n_perturb < 2)
        throw Error(ErrorCode::invalid_argument, "probe needs n_base >= 1 and n_perturb >= 2");
    if (!(probe.hi > probe.lo)) throw Error(ErrorCode::invalid_argument, "probe box must have hi > lo");

    CoordinateVariance out;
    std::vector<double> point(static_cast<std::size_t>(f.arity));
    std::vector<double> values(static_cast<std::size_t>(probe.n_perturb));
    double total = 0.0;
    int completed = 0;
    for (int b = 0; b < probe.n_base; ++b) {
        // base coordinates on lane 0; the sweep of argument `pos` on lane 1 + pos
        for (int c = 0; c < f.arity; ++c) point[c] = draw(probe, b, c, 0);
        for (int p = 0; p < probe.n_perturb; ++p) {
            if (budget_used >= f.evaluation_budget) {
                out.exhausted = true;
                out.value = completed > 0 ? total / completed : std::numeric_limits<double>::quiet_NaN();
                return out;
            }
            point[pos] = draw(probe, b, p, 1 + static_cast<std::uint64_t>(pos));
            values[p] = f.evaluator(point);
            ++budget_used;
            ++out.evaluations;
        }
        // shifted by the first sample, so a constant sweep gives exactly zero
        double s = 0.0, ss = 0.0;
        for (double v : values) {
            s += v - values[0];
            ss += (v - values[0]) * (v - values[0]);
        }
        total += std::max(ss - s * s / probe.n_perturb, 0.0) / (probe.n_perturb - 1);
        ++completed;
    }
    out.value = total / completed;
    return out;
}

DependencyReport detect_order(const BlackBoxFunction& f, const ProbeSpec& probe, const DetectOptions& options) {
    if (options.threshold && !(*options.threshold > 0.0))
        throw Error(ErrorCode::invalid_argument, "threshold must be positive");
    if (options.stop_after < 1) throw Error(ErrorCode::invalid_argument, "stop rule needs S >= 1");

    DependencyReport report;
    report.first_index = f.first_index;
    report.per_index_variance.assign(f.arity, std::numeric_limits<double>::quiet_NaN());
    report.dependent.assign(f.arity, false);

    const auto threshold = [&](double max_seen) {
        return options.threshold ? *options.threshold : std::max(relative_threshold * max_seen, threshold_floor);
    };

    double max_seen = 0.0;
    int quiet_run = 0;
    int evaluated = 0;
    for (int pos = 0; pos < f.arity; ++pos) {
        const auto cv = coordinate_variance(f, f.first_index + pos, probe, report.budget_used);
        if (cv.exhausted) {
            report.budget_exhausted = true;
            break;
        }
        report.per_index_variance[pos] = cv.value;
        evaluated = pos + 1;
        max_seen = std::max(max_seen, cv.value);
        const bool dep = cv.value > threshold(max_seen);
        quiet_run = dep ? 0 : quiet_run + 1;
        if (quiet_run >= options.stop_after && pos + 1 < f.arity) {
            report.stopped_early = true;
            break;
        }
    }
    report.stop_index = f.first_index + std::max(evaluated - 1, 0);

    // final verdict against the threshold implied by everything observed
    report.threshold_used = threshold(max_seen);
    report.detected_order = 0;
    for (int pos = 0; pos < evaluated; ++pos) {
        report.dependent[pos] = report.per_index_variance[pos] > report.threshold_used;
        if (report.dependent[pos]) report.detected_order = f.first_index + pos;
    }
    return report;
}

BlackBoxFunction derivative_blackbox(const PdeSpec& pde, const DerivativeProbeConfig& cfg) {
    if (cfg.d_max < 0) throw Error(ErrorCode::invalid_argument, "d_max must be >= 0");
    if (!(cfg.dt_micro > 0.0)) throw Error(ErrorCode::invalid_argument, "dt_micro must be positive");
    const ToothConfig tooth{cfg.h, cfg.H};
    tooth.validate();

    BlackBoxFunction f;
    f.arity = cfg.d_max + 1;
    f.first_index = 0;
    f.evaluator = [pde, cfg, tooth](std::span<const double> d) {
        const TaylorPolynomial p(0.0, std::vector<double>(d.begin(), d.end()));
        if (!cfg.H) {
            const double before = patch::restrict_average(p, tooth);
            const double after = patch::restrict_average(micro::evolve_poly_exact(p, pde, cfg.dt_micro), tooth);
            return (after - before) / cfg.dt_micro;
        }
        const double before = patch::restrict_average(micro::evolve_fd_buffered(p, pde, 0.0, tooth, cfg.grid), tooth);
        const double after =
            patch::restrict_average(micro::evolve_fd_buffered(p, pde, cfg.dt_micro, tooth, cfg.grid), tooth);
        return (after - before) / cfg.dt_micro;
    };
    return f;
}

} // namespace eqf::order
