#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "rcpose/geometry.h"
#include "rcpose/kernels/kernels.h"

namespace rcpose {

// Sampled 3D points of an object model, in the object frame (meters).
// Stored as separate coordinate arrays so the per-point kernels can stream them.
class ModelPoints {
  public:
    ModelPoints() = default;
    explicit ModelPoints(const std::vector<Vec3> &points);

    std::size_t size() const { return x_.size(); }
    bool empty() const { return x_.empty(); }
    Vec3 point(std::size_t i) const { return Vec3(x_[i], y_[i], z_[i]); }
    std::vector<Vec3> to_vector() const;

    kernels::PointsView view() const { return {x_.data(), y_.data(), z_.data(), x_.size()}; }

    // Deterministic subset of `count` points drawn without replacement.
    // Returns a copy when count >= size().
    ModelPoints subsample(std::size_t count, std::uint64_t seed) const;

    // JSON array of [x, y, z] triples.
    static ModelPoints from_json_text(std::string_view text);
    // Only `v x y z` records are read.
    static ModelPoints from_obj_text(std::string_view text);
    // Dispatches on the extension (.json or .obj).
    static ModelPoints load(const std::filesystem::path &path);

    // Axis-aligned box surface samples, useful for synthetic experiments.
    static ModelPoints box_surface(const Vec3 &size_m, std::size_t count, std::uint64_t seed);

  private:
    void push(const Vec3 &p);
    void validate() const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> z_;
};

inline constexpr std::size_t kDefaultLossPointCount = 500;

}  // namespace rcpose
