/// @file metrics.hpp
/// @brief Pixel-wise statistical scores of a prediction against a truth grid.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fluxdown/error.hpp"
#include "fluxdown/grid.hpp"

namespace fluxdown {

struct MetricReport {
    double rmse = 0.0;
    double r2 = 0.0;
    double pcc = 0.0;
    double bias = 0.0;
    std::size_t n = 0;
    std::optional<double> l_flux;
    std::optional<double> l_spec;
};

namespace detail {

inline void require_metric_pair(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) {
        throw Error(ErrorKind::dimension_mismatch, "prediction has " + std::to_string(pred.size()) +
                                                       " pixels, truth has " + std::to_string(truth.size()));
    }
    if (pred.empty()) {
        throw Error(ErrorKind::invalid_argument, "metrics need at least one pixel");
    }
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sum_sq_dev(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s;
}

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
    require_metric_pair(pred, truth);
    double s = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = pred[k] - truth[k];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double r_squared(std::span<const double> pred, std::span<const double> truth) {
    require_metric_pair(pred, truth);
    const double denom = sum_sq_dev(truth, mean_of(truth));
    if (!(denom > 0.0)) {
        throw Error(ErrorKind::degenerate, "r2: truth field is constant (zero variance)");
    }
    double num = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = pred[k] - truth[k];
        num += d * d;
    }
    return (denom - num) / denom;
}

inline double pearson(std::span<const double> pred, std::span<const double> truth) {
    require_metric_pair(pred, truth);
    const double mp = mean_of(pred);
    const double mt = mean_of(truth);
    const double vp = sum_sq_dev(pred, mp);
    const double vt = sum_sq_dev(truth, mt);
    if (!(vp > 0.0)) {
        throw Error(ErrorKind::degenerate, "pcc: prediction field is constant (zero variance)");
    }
    if (!(vt > 0.0)) {
        throw Error(ErrorKind::degenerate, "pcc: truth field is constant (zero variance)");
    }
    double cov = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        cov += (pred[k] - mp) * (truth[k] - mt);
    }
    return std::clamp(cov / std::sqrt(vp * vt), -1.0, 1.0);
}

inline double bias(std::span<const double> pred, std::span<const double> truth) {
    require_metric_pair(pred, truth);
    double s = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) s += pred[k] - truth[k];
    return s / static_cast<double>(pred.size());
}

inline MetricReport compute_metrics(std::span<const double> pred, std::span<const double> truth) {
    MetricReport rep;
    rep.rmse = rmse(pred, truth);
    rep.r2 = r_squared(pred, truth);
    rep.pcc = pearson(pred, truth);
    rep.bias = bias(pred, truth);
    rep.n = pred.size();
    return rep;
}

}  // namespace detail

inline double rmse(const Grid2D& pred, const Grid2D& truth) {
    require_same_shape(pred, truth, "rmse");
    return detail::rmse(pred.values(), truth.values());
}

inline double r_squared(const Grid2D& pred, const Grid2D& truth) {
    require_same_shape(pred, truth, "r2");
    return detail::r_squared(pred.values(), truth.values());
}

inline double pearson(const Grid2D& pred, const Grid2D& truth) {
    require_same_shape(pred, truth, "pcc");
    return detail::pearson(pred.values(), truth.values());
}

inline double bias(const Grid2D& pred, const Grid2D& truth) {
    require_same_shape(pred, truth, "bias");
    return detail::bias(pred.values(), truth.values());
}

inline MetricReport compute_metrics(const Grid2D& pred, const Grid2D& truth) {
    require_same_shape(pred, truth, "metrics");
    return detail::compute_metrics(pred.values(), truth.values());
}

struct ScenePair {
    const Grid2D* pred = nullptr;
    const Grid2D* truth = nullptr;
};

enum class Aggregation { scene_mean, pooled };

/// Multi-scene scores: the arithmetic mean of per-scene metrics, or the
/// metrics of all pixels pooled together. Optional physics terms are averaged
/// only when every scene carries them.
inline MetricReport aggregate_metrics(std::span<const MetricReport> scenes) {
    if (scenes.empty()) {
        throw Error(ErrorKind::invalid_argument, "no scenes to aggregate");
    }
    MetricReport out;
    bool has_flux = true;
    bool has_spec = true;
    double flux = 0.0;
    double spec = 0.0;
    for (const auto& s : scenes) {
        out.rmse += s.rmse;
        out.r2 += s.r2;
        out.pcc += s.pcc;
        out.bias += s.bias;
        out.n += s.n;
        has_flux = has_flux && s.l_flux.has_value();
        has_spec = has_spec && s.l_spec.has_value();
        flux += s.l_flux.value_or(0.0);
        spec += s.l_spec.value_or(0.0);
    }
    const double m = static_cast<double>(scenes.size());
    out.rmse /= m;
    out.r2 /= m;
    out.pcc /= m;
    out.bias /= m;
    if (has_flux) out.l_flux = flux / m;
    if (has_spec) out.l_spec = spec / m;
    return out;
}

inline MetricReport aggregate_metrics(std::span<const ScenePair> scenes, Aggregation mode) {
    if (scenes.empty()) {
        throw Error(ErrorKind::invalid_argument, "no scenes to aggregate");
    }
    if (mode == Aggregation::pooled) {
        std::vector<double> pred;
        std::vector<double> truth;
        for (const auto& s : scenes) {
            require_same_shape(*s.pred, *s.truth, "metrics");
            pred.insert(pred.end(), s.pred->values().begin(), s.pred->values().end());
            truth.insert(truth.end(), s.truth->values().begin(), s.truth->values().end());
        }
        return detail::compute_metrics(pred, truth);
    }
    std::vector<MetricReport> per_scene;
    per_scene.reserve(scenes.size());
    for (const auto& s : scenes) per_scene.push_back(compute_metrics(*s.pred, *s.truth));
    return aggregate_metrics(std::span<const MetricReport>(per_scene));
}

}  // namespace fluxdown
