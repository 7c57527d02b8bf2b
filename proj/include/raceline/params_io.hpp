#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "raceline/common.hpp"
#include "raceline/covariates.hpp"
#include "raceline/drafting.hpp"
#include "raceline/model.hpp"

namespace raceline {

constexpr const char* kParamsFormat = "raceline-params";
constexpr int kParamsVersion = 1;

// Provenance stamped into every parameter file so downstream outputs can name
// the exact configuration and seed that produced them.
struct ParamsMeta {
    std::string config_digest;
    std::uint64_t seed = 0;
};

struct LoadedParams {
    FittedParams params;
    DragTable drag;
    ParamsMeta meta;
};

namespace detail {

inline nlohmann::json standardizer_to_json(const Standardizer& s) {
    return {{"mean", s.mean}, {"sd", s.sd}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.sd = j.at("sd").get<std::vector<double>>();
    if (s.mean.size() != s.sd.size())
        throw std::runtime_error("parameter file: standardizer mean/sd length mismatch");
    return s;
}

inline nlohmann::json axis_to_json(const AxisParams& a, const FitInfo& info) {
    return {
        {"layout",
         {{"horses", a.layout.H},
          {"basis", a.layout.B},
          {"jockeys", a.layout.J},
          {"contexts", a.layout.C},
          {"covariates", a.layout.P}}},
        {"mode", a.mode},
        {"curvature_sd", a.curvature_sd},
        {"fit",
         {{"iterations", info.iterations},
          {"converged", info.converged},
          {"neg_log_posterior", info.neg_log_posterior},
          {"rows", info.n_rows},
          {"warnings", info.warnings}}},
    };
}

inline void axis_from_json(const nlohmann::json& j, AxisParams& a, FitInfo& info,
                           const char* which) {
    const auto& l = j.at("layout");
    a.layout.H = l.at("horses").get<size_t>();
    a.layout.B = l.at("basis").get<size_t>();
    a.layout.J = l.at("jockeys").get<size_t>();
    a.layout.C = l.at("contexts").get<size_t>();
    a.layout.P = l.at("covariates").get<size_t>();
    a.mode = j.at("mode").get<std::vector<double>>();
    a.curvature_sd = j.at("curvature_sd").get<std::vector<double>>();
    if (a.mode.size() != a.layout.size() || a.curvature_sd.size() != a.layout.size())
        throw std::runtime_error(
            strprintf("parameter file: %s parameter block does not match its layout", which));
    const auto& f = j.at("fit");
    info.iterations = f.at("iterations").get<int>();
    info.converged = f.at("converged").get<bool>();
    info.neg_log_posterior = f.at("neg_log_posterior").get<double>();
    info.n_rows = f.at("rows").get<size_t>();
    info.warnings = f.at("warnings").get<std::vector<std::string>>();
}

inline nlohmann::json drag_to_json(const DragTable& d) {
    return {
        {"behind_grid", d.behind_grid},
        {"lateral_grid", d.lateral_grid},
        {"coefficients", d.coefficients},
        {"clean_air", d.clean_air},
        {"fade_behind", d.fade_behind},
        {"fade_lateral", d.fade_lateral},
        {"air_density", d.air_density},
        {"frontal_area", d.frontal_area},
    };
}

inline DragTable drag_from_json(const nlohmann::json& j) {
    DragTable d;
    d.behind_grid = j.at("behind_grid").get<std::vector<double>>();
    d.lateral_grid = j.at("lateral_grid").get<std::vector<double>>();
    d.coefficients = j.at("coefficients").get<std::vector<std::vector<double>>>();
    d.clean_air = j.at("clean_air").get<double>();
    d.fade_behind = j.at("fade_behind").get<double>();
    d.fade_lateral = j.at("fade_lateral").get<double>();
    d.air_density = j.at("air_density").get<double>();
    d.frontal_area = j.at("frontal_area").get<double>();
    d.validate();
    return d;
}

}  // namespace detail

inline nlohmann::json params_to_json(const FittedParams& p, const DragTable& drag,
                                     const ParamsMeta& meta) {
    return {
        {"format", kParamsFormat},
        {"version", kParamsVersion},
        {"meta", {{"config_digest", meta.config_digest}, {"seed", meta.seed}}},
        {"horses", p.horses},
        {"jockeys", p.jockeys},
        {"contexts", p.contexts},
        {"spline",
         {{"degree", p.spline_spec.degree},
          {"lower", p.spline_spec.lower},
          {"upper", p.spline_spec.upper},
          {"internal_knots", p.spline_spec.internal_knots}}},
        {"standardize_forward", detail::standardizer_to_json(p.std_forward)},
        {"standardize_lateral", detail::standardizer_to_json(p.std_lateral)},
        {"drag", detail::drag_to_json(drag)},
        {"forward", detail::axis_to_json(p.forward, p.forward_info)},
        {"lateral", detail::axis_to_json(p.lateral, p.lateral_info)},
    };
}

inline LoadedParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", std::string{}) != kParamsFormat)
        throw std::runtime_error("parameter file: unrecognized format");
    int version = j.value("version", -1);
    if (version != kParamsVersion)
        throw std::runtime_error(
            strprintf("parameter file: unsupported version %d (expected %d)", version,
                      kParamsVersion));

    LoadedParams out;
    FittedParams& p = out.params;
    p.horses = j.at("horses").get<std::vector<std::string>>();
    p.jockeys = j.at("jockeys").get<std::vector<std::string>>();
    p.contexts = j.at("contexts").get<std::vector<std::string>>();
    const auto& sp = j.at("spline");
    p.spline_spec.degree = sp.at("degree").get<int>();
    p.spline_spec.lower = sp.at("lower").get<double>();
    p.spline_spec.upper = sp.at("upper").get<double>();
    p.spline_spec.internal_knots = sp.at("internal_knots").get<std::vector<double>>();
    p.std_forward = detail::standardizer_from_json(j.at("standardize_forward"));
    p.std_lateral = detail::standardizer_from_json(j.at("standardize_lateral"));
    detail::axis_from_json(j.at("forward"), p.forward, p.forward_info, "forward");
    detail::axis_from_json(j.at("lateral"), p.lateral, p.lateral_info, "lateral");
    out.drag = detail::drag_from_json(j.at("drag"));
    out.meta.config_digest = j.at("meta").at("config_digest").get<std::string>();
    out.meta.seed = j.at("meta").at("seed").get<std::uint64_t>();

    if (p.forward.layout.B > 0 && p.forward.layout.H != p.horses.size())
        throw std::runtime_error("parameter file: horse count does not match forward layout");
    for (const AxisParams* a : {&p.forward, &p.lateral}) {
        if (a->layout.J != p.jockeys.size())
            throw std::runtime_error("parameter file: jockey count does not match a layout");
        if (a->layout.C != p.contexts.size())
            throw std::runtime_error("parameter file: context count does not match a layout");
    }
    if (p.std_forward.mean.size() != p.forward.layout.P ||
        p.std_lateral.mean.size() != p.lateral.layout.P)
        throw std::runtime_error(
            "parameter file: standardization constants do not match covariate counts");
    return out;
}

inline void save_params(const std::string& path, const FittedParams& p,
                        const DragTable& drag, const ParamsMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write parameter file: " + path);
    out << params_to_json(p, drag, meta).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing parameter file: " + path);
}

inline LoadedParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open parameter file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(strprintf("parameter file %s: %s", path.c_str(), e.what()));
    }
    return params_from_json(j);
}

}  // namespace raceline
