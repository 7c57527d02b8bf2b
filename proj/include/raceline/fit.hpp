#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/covariates.hpp"
#include "raceline/model.hpp"
#include "raceline/spline.hpp"

namespace raceline {

struct FitOptions {
    int max_iterations = 2000;
    double rel_tolerance = 1e-8;   // on the objective change per step
    double grad_tolerance = 1e-5;  // on the gradient max-norm
    int memory = 10;

    // Optional Hessian-diagonal estimate used to scale the search direction;
    // refreshed every `precondition_interval` accepted steps.
    std::function<std::vector<double>(const std::vector<double>&)> preconditioner;
    int precondition_interval = 100;
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace detail

// Limited-memory quasi-Newton minimizer with a backtracking line search.
// The objective is called as obj(x, grad) and must fill the gradient.
template <typename Objective>
MinimizeResult lbfgs_minimize(Objective&& obj, std::vector<double> x0,
                              const FitOptions& opt) {
    const size_t n = x0.size();
    const double c1 = 1e-4;

    MinimizeResult res;
    std::vector<double> g(n), g_new(n), x_new(n), d(n), q(n);
    double fx = obj(x0, g);
    if (!std::isfinite(fx)) throw std::runtime_error("optimizer: objective not finite at start");

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;

    std::vector<double> precond;  // Hessian diagonal, clamped positive
    auto refresh_precond = [&](const std::vector<double>& at) {
        if (!opt.preconditioner) return;
        precond = opt.preconditioner(at);
        double top = 0.0;
        for (double v : precond)
            if (std::isfinite(v)) top = std::max(top, v);
        if (top <= 0.0) {
            precond.assign(n, 1.0);
            return;
        }
        for (double& v : precond)
            if (!std::isfinite(v) || v < 1e-8 * top) v = 1e-8 * top;
    };
    refresh_precond(x0);
    int last_refresh = 0;
    bool retried_stall = false;

    for (int iter = 1; iter <= opt.max_iterations; ++iter) {
        res.iterations = iter;
        double gmax = detail::max_abs(g);
        if (gmax < opt.grad_tolerance) {
            res.converged = true;
            break;
        }
        if (opt.preconditioner && iter - last_refresh >= opt.precondition_interval) {
            refresh_precond(x0);
            last_refresh = iter;
        }

        // two-loop recursion for the search direction
        q = g;
        std::vector<double> alpha(s_hist.size());
        for (size_t k = s_hist.size(); k-- > 0;) {
            alpha[k] = rho_hist[k] * detail::dot(s_hist[k], q);
            for (size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_hist[k][i];
        }
        if (!precond.empty()) {
            // seed with the curvature diagonal, scaled to match the newest pair
            double gamma = 1.0;
            if (!s_hist.empty()) {
                double ydy = 0.0;
                const auto& yv = y_hist.back();
                for (size_t i = 0; i < n; ++i) ydy += yv[i] * yv[i] / precond[i];
                if (ydy > 0.0) gamma = 1.0 / (rho_hist.back() * ydy);
            }
            for (size_t i = 0; i < n; ++i) q[i] *= gamma / precond[i];
        } else if (!s_hist.empty()) {
            double gamma = 1.0 / (rho_hist.back() * detail::dot(y_hist.back(), y_hist.back()));
            for (double& v : q) v *= gamma;
        }
        for (size_t k = 0; k < s_hist.size(); ++k) {
            double beta = rho_hist[k] * detail::dot(y_hist[k], q);
            for (size_t i = 0; i < n; ++i) q[i] += (alpha[k] - beta) * s_hist[k][i];
        }
        for (size_t i = 0; i < n; ++i) d[i] = -q[i];

        double dg = detail::dot(d, g);
        if (dg >= 0.0) {  // not a descent direction: restart from steepest descent
            for (size_t i = 0; i < n; ++i) d[i] = -g[i];
            dg = -detail::dot(g, g);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = s_hist.empty() && precond.empty()
                          ? std::min(1.0, 1.0 / std::max(1.0, gmax))
                          : 1.0;
        double f_new = fx;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            for (size_t i = 0; i < n; ++i) x_new[i] = x0[i] + step * d[i];
            f_new = obj(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + c1 * step * dg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (opt.preconditioner && !retried_stall) {
                // stale curvature is the usual culprit; refresh and retry once
                retried_stall = true;
                refresh_precond(x0);
                last_refresh = iter;
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            if (-dg < 1e-9 * (1.0 + std::abs(fx))) {
                // the model's achievable decrease is below the resolution of
                // the objective itself: this is the numerical mode
                res.converged = true;
                res.warnings.push_back("optimizer: stopped at numerical precision");
            } else {
                res.warnings.push_back("optimizer: line search stalled");
                res.converged = gmax < opt.grad_tolerance;
            }
            break;
        }
        retried_stall = false;

        std::vector<double> s(n), ydiff(n);
        for (size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x0[i];
            ydiff[i] = g_new[i] - g[i];
        }
        double sy = detail::dot(s, ydiff);
        double sn = std::sqrt(detail::dot(s, s)), yn = std::sqrt(detail::dot(ydiff, ydiff));
        if (sy > 1e-10 * sn * yn) {  // keep only pairs with solid curvature
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(ydiff));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        double rel = std::abs(fx - f_new) / std::max(1.0, std::abs(f_new));
        x0.swap(x_new);
        g.swap(g_new);
        fx = f_new;
        if (rel < opt.rel_tolerance && detail::max_abs(g) < opt.grad_tolerance) {
            res.converged = true;
            break;
        }
    }

    if (!res.converged && res.iterations >= opt.max_iterations)
        res.warnings.push_back("optimizer: iteration cap reached before convergence");
    res.x = std::move(x0);
    res.value = fx;
    return res;
}

// Sorted entity dictionaries harvested from a design-row set.
struct DesignDictionary {
    std::vector<std::string> horses, jockeys, contexts;

    static DesignDictionary from(const std::vector<DesignRow>& rows) {
        DesignDictionary d;
        for (const auto& r : rows) {
            d.horses.push_back(r.horse_id);
            d.jockeys.push_back(r.jockey_id);
            d.contexts.push_back(r.context);
        }
        for (auto* v : {&d.horses, &d.jockeys, &d.contexts}) {
            std::sort(v->begin(), v->end());
            v->erase(std::unique(v->begin(), v->end()), v->end());
        }
        return d;
    }

    static int index_of(const std::vector<std::string>& v, const std::string& id) {
        auto it = std::lower_bound(v.begin(), v.end(), id);
        if (it == v.end() || *it != id)
            throw std::out_of_range("design: id missing from dictionary: " + id);
        return static_cast<int>(it - v.begin());
    }
};

inline AxisData assemble_forward_axis(const std::vector<DesignRow>& rows,
                                      const DesignDictionary& dict,
                                      const BSplineBasis& basis,
                                      const Standardizer& standardizer) {
    AxisData data;
    data.n_horses = dict.horses.size();
    data.n_jockeys = dict.jockeys.size();
    data.n_contexts = dict.contexts.size();
    data.n_covariates = kForwardCovariateCount;
    data.spline_dim = static_cast<size_t>(basis.dimension());
    data.spline_order = basis.order();
    for (const auto& r : rows) {
        data.y.push_back(r.d_forward);
        data.horse.push_back(DesignDictionary::index_of(dict.horses, r.horse_id));
        data.jockey.push_back(DesignDictionary::index_of(dict.jockeys, r.jockey_id));
        data.context.push_back(DesignDictionary::index_of(dict.contexts, r.context));
        ForwardRow x = r.x_forward;
        standardizer.apply(x);
        data.x.insert(data.x.end(), x.begin(), x.end());
        double vals[8];
        int first = basis.row_sparse(r.j, vals);
        data.spline_first.push_back(first);
        for (int k = 0; k < basis.order(); ++k) data.spline_vals.push_back(vals[k]);
    }
    return data;
}

inline AxisData assemble_lateral_axis(const std::vector<DesignRow>& rows,
                                      const DesignDictionary& dict,
                                      const Standardizer& standardizer) {
    AxisData data;
    data.n_horses = dict.horses.size();
    data.n_jockeys = dict.jockeys.size();
    data.n_contexts = dict.contexts.size();
    data.n_covariates = kLateralCovariateCount;
    for (const auto& r : rows) {
        data.y.push_back(r.d_lateral);
        data.horse.push_back(DesignDictionary::index_of(dict.horses, r.horse_id));
        data.jockey.push_back(DesignDictionary::index_of(dict.jockeys, r.jockey_id));
        data.context.push_back(DesignDictionary::index_of(dict.contexts, r.context));
        LateralRow x = r.x_lateral;
        standardizer.apply(x);
        data.x.insert(data.x.end(), x.begin(), x.end());
    }
    return data;
}

namespace detail {

inline double prior_sd_for(const ParamLayout& l, const ModelConfig& cfg, size_t idx) {
    if (idx < l.mu_off()) return cfg.theta_prior_sd;
    if (idx < l.jockey_off()) return cfg.mu_prior_sd;
    if (idx < l.context_off()) return cfg.delta_prior_sd;
    if (idx < l.psi_off()) return cfg.delta_prior_sd;
    if (idx < l.logsig_off()) return cfg.psi_prior_sd;
    return 1.0;
}

}  // namespace detail

// Maximum-a-posteriori fit of one axis with a diagonal Gaussian
// approximation around the mode.
inline AxisParams fit_axis(const AxisData& data, const ModelConfig& cfg,
                           const FitOptions& options, FitInfo* info = nullptr) {
    data.validate(cfg);
    ParamLayout layout = ParamLayout::from(data, cfg);
    std::vector<double> start(layout.size(), 0.0);
    start[layout.logsig_off()] = cfg.fix_sigma ? cfg.fixed_log_sigma : 0.0;

    std::vector<std::string> warnings;
    // The minimizer sees the per-row average of the posterior: raw totals grow
    // with the dataset until the gradient tolerance chases decreases smaller
    // than one ulp of the objective, which no optimizer can resolve.
    const double scale = 1.0 / static_cast<double>(std::max<size_t>(data.rows(), 1));
    auto objective = [&](const std::vector<double>& x, std::vector<double>& grad) {
        double f = neg_log_posterior(data, cfg, x, &grad);
        for (double& g : grad) g *= scale;
        return f * scale;
    };
    FitOptions opts = options;
    if (!opts.preconditioner)
        opts.preconditioner = [&data, &cfg, scale](const std::vector<double>& x) {
            std::vector<double> d = curvature_diag(data, cfg, x);
            for (double& v : d) v *= scale;
            return d;
        };
    MinimizeResult min = lbfgs_minimize(objective, std::move(start), opts);
    min.value /= scale;
    warnings.insert(warnings.end(), min.warnings.begin(), min.warnings.end());

    AxisParams out;
    out.layout = layout;
    out.mode = min.x;
    out.curvature_sd.assign(layout.size(), 0.0);
    std::vector<double> diag = curvature_diag(data, cfg, out.mode);
    bool fell_back = false;
    for (size_t i = 0; i < diag.size(); ++i) {
        if (cfg.fix_sigma && i == layout.logsig_off()) continue;  // stays zero
        if (diag[i] > 1e-12) {
            out.curvature_sd[i] = 1.0 / std::sqrt(diag[i]);
        } else {
            out.curvature_sd[i] = detail::prior_sd_for(layout, cfg, i);
            fell_back = true;
        }
    }
    if (fell_back)
        warnings.push_back(
            "curvature: non-positive diagonal entries replaced by prior scales");

    if (info) {
        info->iterations = min.iterations;
        info->converged = min.converged;
        info->neg_log_posterior = min.value;
        info->n_rows = data.rows();
        info->warnings = warnings;
    }
    return out;
}

struct FitSettings {
    SplineSpec spline_spec{};
    FitOptions options{};
    bool standardize = true;  // identity scaling when false
    ModelConfig forward_model = [] {
        ModelConfig m;
        m.truncated = true;
        m.has_spline = true;
        return m;
    }();
    ModelConfig lateral_model{};
};

// Fits both axes from prepared design rows and packages everything the
// simulator needs.
inline FittedParams fit_dataset(const std::vector<DesignRow>& rows,
                                const FitSettings& settings) {
    if (rows.empty()) throw std::invalid_argument("fit: no design rows");
    DesignDictionary dict = DesignDictionary::from(rows);
    BSplineBasis basis{settings.spline_spec};

    FittedParams params;
    params.horses = dict.horses;
    params.jockeys = dict.jockeys;
    params.contexts = dict.contexts;
    params.spline_spec = settings.spline_spec;

    if (settings.standardize) {
        std::vector<ForwardRow> xf;
        std::vector<LateralRow> xl;
        xf.reserve(rows.size());
        xl.reserve(rows.size());
        for (const auto& r : rows) {
            xf.push_back(r.x_forward);
            xl.push_back(r.x_lateral);
        }
        params.std_forward = Standardizer::fit(xf);
        params.std_lateral = Standardizer::fit(xl);
    } else {
        params.std_forward = Standardizer::identity(kForwardCovariateCount);
        params.std_lateral = Standardizer::identity(kLateralCovariateCount);
    }

    AxisData fwd = assemble_forward_axis(rows, dict, basis, params.std_forward);
    AxisData lat = assemble_lateral_axis(rows, dict, params.std_lateral);
    params.forward = fit_axis(fwd, settings.forward_model, settings.options,
                              &params.forward_info);
    params.lateral = fit_axis(lat, settings.lateral_model, settings.options,
                              &params.lateral_info);
    return params;
}

}  // namespace raceline
