#include "eqf/micro_models.hpp"

#include "eqf/simd/kernels.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace eqf::micro {

SdeModel SdeModel::zero_drift(double noise_amplitude) {
    return {[](double) { return 0.0; }, noise_amplitude};
}

SdeModel SdeModel::ornstein_uhlenbeck(double theta, double noise_amplitude) {
    return {[theta](double x) { return -theta * x; }, noise_amplitude};
}

TaylorPolynomial evolve_poly_exact(const TaylorPolynomial& p, const PdeSpec& pde, double dt) {
    if (!(dt >= 0.0)) throw Error(ErrorCode::invalid_argument, "evolution time must be >= 0");
    TaylorPolynomial result = p;
    TaylorPolynomial term = p; // dt^m / m! L^m p
    // Each application of L lowers the degree by at least min_order.
    for (int m = 1; m <= p.degree() / pde.min_order(); ++m) {
        TaylorPolynomial next = TaylorPolynomial::zero(p.center());
        for (auto [r, a] : pde.coefficients()) {
            if (r > term.degree()) continue;
            next = poly_add(next, poly_scale(poly_apply_derivative(term, r), a));
        }
        term = poly_scale(next, dt / m);
        result = poly_add(result, term);
    }
    return result;
}

double max_stable_micro_step(const PdeSpec& pde, double dx_micro) {
    if (!(dx_micro > 0.0)) throw Error(ErrorCode::invalid_argument, "micro spacing must be positive");
    double bound = std::numeric_limits<double>::infinity();
    for (auto [r, a] : pde.coefficients()) {
        switch (r) {
        case 1: bound = std::min(bound, 0.8 * dx_micro / std::abs(a)); break;
        case 2:
            if (a < 0.0) throw Error(ErrorCode::unstable_micro_step, "backward diffusion (a_2 < 0)");
            bound = std::min(bound, 0.4 * dx_micro * dx_micro / a);
            break;
        case 4:
            if (a > 0.0) throw Error(ErrorCode::unstable_micro_step, "anti-dissipative fourth order (a_4 > 0)");
            bound = std::min(bound, 0.3 * std::pow(dx_micro, 4) / (8.0 * -a));
            break;
        default: {
            std::ostringstream os;
            os << "finite-difference microsolver has no stencil for derivative order " << r;
            throw Error(ErrorCode::unsupported_operator, os.str());
        }
        }
    }
    return bound;
}

double influence_radius(const PdeSpec& pde, double dt) {
    double radius = 0.0;
    for (auto [r, a] : pde.coefficients()) {
        switch (r) {
        case 1: radius += std::abs(a) * dt; break;
        case 2: radius += 6.0 * std::sqrt(std::abs(a) * dt); break;
        case 4: radius += 6.0 * std::pow(std::abs(a) * dt, 0.25); break;
        default: radius += 6.0 * std::pow(std::abs(a) * dt, 1.0 / r); break;
        }
    }
    return radius;
}

MicroFieldState sample_polynomial(const TaylorPolynomial& p, double H, double dx_micro) {
    if (!(H > 0.0) || !std::isfinite(H))
        throw Error(ErrorCode::invalid_argument, "micro box width must be finite and positive");
    if (!(dx_micro > 0.0)) throw Error(ErrorCode::invalid_argument, "micro spacing must be positive");
    const auto half = static_cast<std::size_t>(std::ceil(0.5 * H / dx_micro - 1e-9));
    MicroFieldState field{p.center(), dx_micro, std::vector<double>(2 * half + 1), 0.0};
    if (field.samples.size() < 5)
        throw Error(ErrorCode::invalid_argument, "micro grid needs at least 5 samples");
    for (std::size_t i = 0; i < field.samples.size(); ++i) field.samples[i] = poly_eval(p, field.position(i));
    return field;
}

MicroFieldState evolve_fd_buffered(const TaylorPolynomial& p, const PdeSpec& pde, double dt,
                                   const ToothConfig& tooth, const MicroGrid& grid) {
    tooth.validate();
    if (!tooth.H) throw Error(ErrorCode::invalid_argument, "buffered solver needs a finite H");
    if (!(dt >= 0.0)) throw Error(ErrorCode::invalid_argument, "evolution time must be >= 0");
    if (!(grid.dt > 0.0)) throw Error(ErrorCode::invalid_argument, "micro time step must be positive");

    const double bound = max_stable_micro_step(pde, grid.dx);
    if (grid.dt > bound) {
        std::ostringstream os;
        os << "micro step " << grid.dt << " exceeds stability bound " << bound;
        throw Error(ErrorCode::unstable_micro_step, os.str());
    }
    const double radius = influence_radius(pde, dt);
    if (radius > 0.5 * (*tooth.H - tooth.h)) {
        std::ostringstream os;
        os << "influence radius " << radius << " exceeds buffer half-width " << 0.5 * (*tooth.H - tooth.h);
        throw Error(ErrorCode::buffer_too_small, os.str());
    }

    MicroFieldState field = sample_polynomial(p, *tooth.H, grid.dx);
    if (dt == 0.0) return field;

    const auto n_sub = static_cast<long long>(std::ceil(dt / grid.dt - 1e-12));
    const double tau = dt / static_cast<double>(n_sub);

    std::array<double, 5> c{};
    const double a1 = pde.coefficient(1);
    const double a2 = pde.coefficient(2);
    const double a4 = pde.coefficient(4);
    if (a4 != 0.0) {
        const double k4 = tau * a4 / std::pow(grid.dx, 4);
        c = {k4, -4.0 * k4, 6.0 * k4, -4.0 * k4, k4};
    }
    if (a2 != 0.0) {
        const double k2 = tau * a2 / (grid.dx * grid.dx);
        c[1] += k2;
        c[2] += -2.0 * k2;
        c[3] += k2;
    }
    if (a1 != 0.0) {
        // du/dt = a1 du/dx moves data toward -sign(a1); difference against the flow
        const double k1 = tau * a1 / grid.dx;
        if (a1 < 0.0) {
            c[1] += -k1;
            c[2] += k1;
        } else {
            c[2] += -k1;
            c[3] += k1;
        }
    }

    std::vector<double> next = field.samples; // edges stay frozen
    for (long long s = 0; s < n_sub; ++s) {
        if (a4 != 0.0)
            simd::stencil5_update(field.samples, next, c);
        else
            simd::stencil3_update(field.samples, next, {c[1], c[2], c[3]});
        field.samples.swap(next);
    }
    for (double v : field.samples)
        if (!std::isfinite(v)) throw Error(ErrorCode::unstable_micro_step, "micro field blew up");
    field.time = dt;
    return field;
}

double em_step(double x, const SdeModel& model, double dt_micro, double noise) {
    if (!(dt_micro > 0.0)) throw Error(ErrorCode::invalid_argument, "micro step must be positive");
    return x + model.drift(x) * dt_micro + model.noise_amplitude * std::sqrt(dt_micro) * noise;
}

} // namespace eqf::micro
