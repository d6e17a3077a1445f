#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rcpose/losses.h"
#include "rcpose/random.h"
#include "rcpose/sampling.h"

namespace rcpose {

GradientCheckReport gradient_check(const ScalarFunction &f, std::span<const double> x, std::span<const double> analytic,
                                   const GradientCheckOptions &options) {
    if (x.size() != analytic.size()) {
        throw std::invalid_argument("gradient_check: point and gradient sizes differ");
    }
    if (!(options.step > 0.0)) {
        throw std::invalid_argument("gradient_check: step must be positive");
    }
    const double h = options.step;
    std::vector<double> probe(x.begin(), x.end());
    const double f0 = f(probe);

    GradientCheckReport report;
    report.components.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto eval = [&](double offset) {
            probe[i] = x[i] + offset;
            const double v = f(probe);
            probe[i] = x[i];
            return v;
        };
        // Gap between the forward and backward quotients at step s. For a
        // smooth function it equals s * f'' up to O(s^3).
        const auto gap = [&](double s) { return std::abs((eval(s) - 2.0 * f0 + eval(-s)) / s); };
        const double fp = eval(h);
        const double fm = eval(-h);
        const double g1 = std::abs((fp - 2.0 * f0 + fm) / h);
        const double g2 = gap(0.5 * h);
        const double g4 = gap(0.25 * h);

        ComponentCheck &c = report.components[i];
        c.analytic = analytic[i];
        c.numeric = (fp - fm) / (2.0 * h);
        const double scale = std::max({std::abs(c.analytic), std::abs(c.numeric), options.abs_floor});
        c.rel_error = std::abs(c.analytic - c.numeric) / scale;
        // Halving the step halves a curvature gap; a slope jump within reach
        // breaks that scaling in at least one of the two step pairs.
        const double kink = std::max(std::abs(g2 - 0.5 * g1), std::abs(g4 - 0.5 * g2));
        c.smooth = kink <= options.kink_tolerance * scale;
        if (c.smooth) {
            report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
        } else {
            report.smooth = false;
        }
    }
    return report;
}

GradientCheckReport gradient_check_total_loss(const ParamState &state, const DeltaTheta &delta, const ParamState &gt,
                                              const ModelPoints &points, const LossWeights &weights,
                                              const GradientCheckOptions &options) {
    const LossBreakdown at = total_loss(state, delta, gt, points, weights);
    const DeltaVector x = to_vector(delta);
    const ScalarFunction f = [&](std::span<const double> v) {
        DeltaVector d{};
        std::copy(v.begin(), v.end(), d.begin());
        return total_loss(state, from_vector(d), gt, points, weights).total;
    };
    return gradient_check(f, x, at.grad_total, options);
}

namespace {

ParamState random_state(Rng &rng) {
    std::uniform_real_distribution<double> xy(-0.3, 0.3);
    std::uniform_real_distribution<double> z(0.6, 3.0);
    std::uniform_real_distribution<double> f(200.0, 1500.0);
    ParamState s;
    s.rotation = uniform_rotation(rng);
    s.translation = Translation3(xy(rng), xy(rng), z(rng));
    s.focal = f(rng);
    return s;
}

ParamState perturb(const ParamState &s, Rng &rng, double scale) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 axis(n(rng), n(rng), n(rng));
    ParamState out = s;
    out.rotation = Rotation::from_axis_angle(axis, 0.3 * scale * n(rng)) * s.rotation;
    out.translation += Translation3(0.05 * n(rng), 0.05 * n(rng), 0.1 * n(rng)) * scale;
    out.translation.z() = std::max(out.translation.z(), 0.4);
    out.focal = s.focal * std::exp(0.2 * scale * n(rng));
    return out;
}

}  // namespace

GradientCampaign run_gradient_campaign(const GradientCampaignOptions &options) {
    if (options.points == 0 || options.model_points == 0) {
        throw std::invalid_argument("gradient campaign: point counts must be positive");
    }
    options.weights.validate();
    const ModelPoints pts = ModelPoints::box_surface(Vec3(0.3, 0.2, 0.25), options.model_points, options.seed);
    GradientCampaign out;
    for (std::size_t i = 0; i < options.max_attempts && out.smooth_count < options.points; ++i) {
        Rng rng = make_rng(options.seed, i + 1);
        GradientCampaignPoint p;
        p.index = i;
        p.state = random_state(rng);
        p.gt = perturb(p.state, rng, 1.0);
        p.delta = oracle_delta(p.state, perturb(p.gt, rng, 0.3));
        p.report = gradient_check_total_loss(p.state, p.delta, p.gt, pts, options.weights, options.check);
        if (p.report.smooth) {
            ++out.smooth_count;
            out.max_rel_error = std::max(out.max_rel_error, p.report.max_rel_error);
        }
        out.draws.push_back(std::move(p));
    }
    return out;
}

}  // namespace rcpose
