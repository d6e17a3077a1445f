#include "rcpose/model_points.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rcpose/random.h"

namespace rcpose {

ModelPoints::ModelPoints(const std::vector<Vec3> &points) {
    x_.reserve(points.size());
    y_.reserve(points.size());
    z_.reserve(points.size());
    for (const auto &p : points) push(p);
    validate();
}

void ModelPoints::push(const Vec3 &p) {
    x_.push_back(p.x());
    y_.push_back(p.y());
    z_.push_back(p.z());
}

void ModelPoints::validate() const {
    if (empty()) {
        throw DomainError("model points: at least one point is required");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]) || !std::isfinite(z_[i])) {
            throw DomainError("model points: non-finite coordinate at index " + std::to_string(i));
        }
    }
}

std::vector<Vec3> ModelPoints::to_vector() const {
    std::vector<Vec3> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(point(i));
    return out;
}

ModelPoints ModelPoints::subsample(std::size_t count, std::uint64_t seed) const {
    if (count >= size()) return *this;
    if (count == 0) throw DomainError("model points: subsample count must be positive");
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_rng(seed);
    // Partial Fisher-Yates; std::shuffle's exact sequence is library specific.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t i : idx) pts.push_back(point(i));
    return ModelPoints(pts);
}

ModelPoints ModelPoints::from_json_text(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw std::invalid_argument(std::string("model points: invalid JSON: ") + e.what());
    }
    if (!j.is_array()) throw std::invalid_argument("model points: expected a JSON array of [x, y, z] triples");
    std::vector<Vec3> pts;
    pts.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto &e = j[i];
        if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() || !e[2].is_number()) {
            throw std::invalid_argument("model points: entry " + std::to_string(i) + " is not a numeric triple");
        }
        pts.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    }
    return ModelPoints(pts);
}

ModelPoints ModelPoints::from_obj_text(std::string_view text) {
    std::vector<Vec3> pts;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.size() < 2 || line[0] != 'v' || (line[1] != ' ' && line[1] != '\t')) continue;
        std::istringstream fields(line.substr(2));
        double x, y, z;
        if (!(fields >> x >> y >> z)) {
            throw std::invalid_argument("model points: malformed vertex on OBJ line " + std::to_string(line_no));
        }
        pts.emplace_back(x, y, z);
    }
    return ModelPoints(pts);
}

ModelPoints ModelPoints::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("model points: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") return from_obj_text(buf.str());
    if (ext == ".json") return from_json_text(buf.str());
    throw std::invalid_argument("model points: unsupported file type " + path.string());
}

ModelPoints ModelPoints::box_surface(const Vec3 &size_m, std::size_t count, std::uint64_t seed) {
    if (count == 0 || !(size_m.array() > 0.0).all()) {
        throw DomainError("model points: box needs positive size and count");
    }
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    const Vec3 h = 0.5 * size_m;
    const double ax = size_m.y() * size_m.z();
    const double ay = size_m.x() * size_m.z();
    const double az = size_m.x() * size_m.y();
    std::uniform_real_distribution<double> face(0.0, ax + ay + az);
    std::bernoulli_distribution side(0.5);
    std::vector<Vec3> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vec3 p(unit(rng) * size_m.x(), unit(rng) * size_m.y(), unit(rng) * size_m.z());
        const double pick = face(rng);
        const double s = side(rng) ? 1.0 : -1.0;
        if (pick < ax) {
            p.x() = s * h.x();
        } else if (pick < ax + ay) {
            p.y() = s * h.y();
        } else {
            p.z() = s * h.z();
        }
        pts.push_back(p);
    }
    return ModelPoints(pts);
}

}  // namespace rcpose
