#pragma once

#include <cmath>
#include <random>

#include "rcpose/geometry.h"
#include "rcpose/model_points.h"
#include "rcpose/random.h"
#include "rcpose/update_rules.h"

namespace rcpose::testing {

inline Rotation random_rotation(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Rotation::from_quaternion(n(rng), n(rng), n(rng), n(rng));
}

inline Vec3 random_unit(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

// States in front of the camera with moderate focal lengths.
inline ParamState random_state(Rng &rng) {
    std::uniform_real_distribution<double> xy(-0.3, 0.3);
    std::uniform_real_distribution<double> z(0.6, 3.0);
    std::uniform_real_distribution<double> f(200.0, 1500.0);
    ParamState s;
    s.rotation = random_rotation(rng);
    s.translation = Translation3(xy(rng), xy(rng), z(rng));
    s.focal = f(rng);
    return s;
}

inline ParamState perturbed(const ParamState &s, Rng &rng, double scale) {
    std::normal_distribution<double> n(0.0, 1.0);
    ParamState out = s;
    out.rotation = Rotation::from_axis_angle(random_unit(rng), 0.3 * scale * n(rng)) * s.rotation;
    out.translation += Translation3(0.05 * n(rng), 0.05 * n(rng), 0.1 * n(rng)) * scale;
    out.translation.z() = std::max(out.translation.z(), 0.4);
    out.focal = s.focal * std::exp(0.2 * scale * n(rng));
    return out;
}

inline double max_abs_diff(const ParamState &a, const ParamState &b) {
    const double dr = (a.rotation.matrix() - b.rotation.matrix()).cwiseAbs().maxCoeff();
    const double dt = (a.translation - b.translation).cwiseAbs().maxCoeff();
    return std::max({dr, dt, std::abs(a.focal - b.focal) / b.focal});
}

inline ModelPoints small_object(std::uint64_t seed, std::size_t n = 200) {
    return ModelPoints::box_surface(Vec3(0.3, 0.2, 0.25), n, seed);
}

}  // namespace rcpose::testing
