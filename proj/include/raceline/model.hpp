#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/covariates.hpp"
#include "raceline/normal.hpp"
#include "raceline/rng.hpp"
#include "raceline/spline.hpp"

namespace raceline {

// One axis of motion is modelled as a Gaussian step length around a linear
// mean. The forward axis truncates the step at zero (horses do not run
// backwards) and carries a per-horse distance curve; the lateral axis is a
// plain Gaussian around rider/context/covariate effects.
struct ModelConfig {
    bool truncated = false;
    bool has_spline = false;
    double theta_prior_sd = 0.5;   // per-horse curve coefficients about mu
    double mu_prior_sd = 10.0;     // population-level curve
    double delta_prior_sd = 0.1;   // rider and context offsets
    double psi_prior_sd = 1.0;     // covariate weights
    double sigma_prior_sd = 1.0;   // half-normal on the step noise scale
    bool fix_sigma = false;
    double fixed_log_sigma = 0.0;
};

// Observations for one axis, already indexed and standardized.
struct AxisData {
    size_t n_horses = 0, n_jockeys = 0, n_contexts = 0, n_covariates = 0;
    std::vector<double> y;
    std::vector<int> horse, jockey, context;
    std::vector<double> x;  // row-major, n * n_covariates

    // sparse distance-curve rows (forward axis only)
    size_t spline_dim = 0;
    int spline_order = 4;
    std::vector<int> spline_first;
    std::vector<double> spline_vals;  // n * spline_order

    size_t rows() const { return y.size(); }

    void validate(const ModelConfig& cfg) const {
        size_t n = y.size();
        if (n == 0) throw std::invalid_argument("model: no observations");
        if (horse.size() != n || jockey.size() != n || context.size() != n)
            throw std::invalid_argument("model: index column length mismatch");
        if (x.size() != n * n_covariates)
            throw std::invalid_argument("model: covariate block length mismatch");
        if (cfg.has_spline) {
            if (spline_dim == 0) throw std::invalid_argument("model: spline dimension is zero");
            if (spline_first.size() != n ||
                spline_vals.size() != n * static_cast<size_t>(spline_order))
                throw std::invalid_argument("model: spline row length mismatch");
        }
        for (size_t i = 0; i < n; ++i) {
            if (n_horses && (horse[i] < 0 || static_cast<size_t>(horse[i]) >= n_horses))
                throw std::out_of_range("model: horse index out of range");
            if (n_jockeys && (jockey[i] < 0 || static_cast<size_t>(jockey[i]) >= n_jockeys))
                throw std::out_of_range("model: jockey index out of range");
            if (n_contexts && (context[i] < 0 || static_cast<size_t>(context[i]) >= n_contexts))
                throw std::out_of_range("model: context index out of range");
            if (cfg.has_spline) {
                int f = spline_first[i];
                if (f < 0 || static_cast<size_t>(f) + static_cast<size_t>(spline_order) >
                                 spline_dim)
                    throw std::out_of_range("model: spline support out of range");
            }
        }
    }
};

// Flat parameter vector layout:
//   [theta (H x B, row-major) | mu (B) | jockey (J) | context (C) | psi (P) | log sigma]
struct ParamLayout {
    size_t H = 0, B = 0, J = 0, C = 0, P = 0;

    static ParamLayout from(const AxisData& data, const ModelConfig& cfg) {
        ParamLayout l;
        l.B = cfg.has_spline ? data.spline_dim : 0;
        l.H = cfg.has_spline ? data.n_horses : 0;
        l.J = data.n_jockeys;
        l.C = data.n_contexts;
        l.P = data.n_covariates;
        return l;
    }

    size_t theta_off() const { return 0; }
    size_t mu_off() const { return H * B; }
    size_t jockey_off() const { return mu_off() + B; }
    size_t context_off() const { return jockey_off() + J; }
    size_t psi_off() const { return context_off() + C; }
    size_t logsig_off() const { return psi_off() + P; }
    size_t size() const { return logsig_off() + 1; }
};

// Read-only view of a packed parameter vector (the mode or one draw).
struct ParamView {
    const ParamLayout& layout;
    const double* p;

    ParamView(const ParamLayout& l, const std::vector<double>& v)
        : layout(l), p(v.data()) {
        if (v.size() != l.size())
            throw std::invalid_argument("params: packed vector length mismatch");
    }

    double theta(size_t h, size_t b) const { return p[h * layout.B + b]; }
    double mu(size_t b) const { return p[layout.mu_off() + b]; }
    double delta_jockey(size_t j) const { return p[layout.jockey_off() + j]; }
    double delta_context(size_t c) const { return p[layout.context_off() + c]; }
    double psi(size_t k) const { return p[layout.psi_off() + k]; }
    double log_sigma() const { return p[layout.logsig_off()]; }
    double sigma() const { return std::exp(log_sigma()); }
};

namespace detail {

inline double row_mean(const AxisData& data, const ModelConfig& cfg,
                       const ParamLayout& l, const double* p, size_t i) {
    double m = 0.0;
    if (cfg.has_spline) {
        const double* sv = &data.spline_vals[i * static_cast<size_t>(data.spline_order)];
        const double* th = p + static_cast<size_t>(data.horse[i]) * l.B +
                           static_cast<size_t>(data.spline_first[i]);
        for (int k = 0; k < data.spline_order; ++k) m += sv[k] * th[k];
    }
    if (l.J) m += p[l.jockey_off() + static_cast<size_t>(data.jockey[i])];
    if (l.C) m += p[l.context_off() + static_cast<size_t>(data.context[i])];
    const double* xr = &data.x[i * l.P];
    const double* psi = p + l.psi_off();
    for (size_t k = 0; k < l.P; ++k) m += xr[k] * psi[k];
    return m;
}

}  // namespace detail

// Negative log joint density (likelihood and priors, all normalizing
// constants included; the noise scale is parameterized on the log scale with
// its Jacobian term). Fills `grad` when non-null.
inline double neg_log_posterior(const AxisData& data, const ModelConfig& cfg,
                                const std::vector<double>& param,
                                std::vector<double>* grad = nullptr) {
    ParamLayout l = ParamLayout::from(data, cfg);
    if (param.size() != l.size())
        throw std::invalid_argument("model: parameter vector length mismatch");
    const double* p = param.data();
    if (grad) grad->assign(l.size(), 0.0);

    double log_sigma = p[l.logsig_off()];
    double sigma = std::exp(log_sigma);
    double inv_sigma = 1.0 / sigma;
    double nlp = 0.0;

    for (size_t i = 0; i < data.rows(); ++i) {
        double m = detail::row_mean(data, cfg, l, p, i);
        double z = (data.y[i] - m) * inv_sigma;
        double ll = -0.5 * z * z - 0.5 * kLog2Pi - log_sigma;
        double dll_dm = z * inv_sigma;
        double dll_dlogs = z * z - 1.0;
        if (cfg.truncated) {
            double alpha = m * inv_sigma;
            ll -= log_norm_cdf(alpha);
            double h = norm_hazard(alpha);
            dll_dm -= h * inv_sigma;
            dll_dlogs += h * alpha;
        }
        nlp -= ll;
        if (!grad) continue;
        double gm = -dll_dm;  // d(nlp)/d(mean)
        double* g = grad->data();
        if (cfg.has_spline) {
            const double* sv =
                &data.spline_vals[i * static_cast<size_t>(data.spline_order)];
            double* gt = g + static_cast<size_t>(data.horse[i]) * l.B +
                         static_cast<size_t>(data.spline_first[i]);
            for (int k = 0; k < data.spline_order; ++k) gt[k] += gm * sv[k];
        }
        if (l.J) g[l.jockey_off() + static_cast<size_t>(data.jockey[i])] += gm;
        if (l.C) g[l.context_off() + static_cast<size_t>(data.context[i])] += gm;
        const double* xr = &data.x[i * l.P];
        for (size_t k = 0; k < l.P; ++k) g[l.psi_off() + k] += gm * xr[k];
        g[l.logsig_off()] -= dll_dlogs;
    }

    const double half_log_2pi = 0.5 * kLog2Pi;
    auto gaussian_penalty = [&](double v, double sd, double* gslot) {
        double r = v / sd;
        nlp += 0.5 * r * r + half_log_2pi + std::log(sd);
        if (gslot) *gslot += v / (sd * sd);
    };

    double* g = grad ? grad->data() : nullptr;
    if (cfg.has_spline) {
        double tau2 = cfg.theta_prior_sd * cfg.theta_prior_sd;
        for (size_t h = 0; h < l.H; ++h)
            for (size_t b = 0; b < l.B; ++b) {
                double r = p[h * l.B + b] - p[l.mu_off() + b];
                nlp += 0.5 * r * r / tau2 + half_log_2pi + std::log(cfg.theta_prior_sd);
                if (g) {
                    g[h * l.B + b] += r / tau2;
                    g[l.mu_off() + b] -= r / tau2;
                }
            }
        for (size_t b = 0; b < l.B; ++b)
            gaussian_penalty(p[l.mu_off() + b], cfg.mu_prior_sd,
                             g ? g + l.mu_off() + b : nullptr);
    }
    for (size_t j = 0; j < l.J; ++j)
        gaussian_penalty(p[l.jockey_off() + j], cfg.delta_prior_sd,
                         g ? g + l.jockey_off() + j : nullptr);
    for (size_t c = 0; c < l.C; ++c)
        gaussian_penalty(p[l.context_off() + c], cfg.delta_prior_sd,
                         g ? g + l.context_off() + c : nullptr);
    for (size_t k = 0; k < l.P; ++k)
        gaussian_penalty(p[l.psi_off() + k], cfg.psi_prior_sd,
                         g ? g + l.psi_off() + k : nullptr);

    // half-normal on sigma, with the log-scale change of variables
    {
        double s2 = cfg.sigma_prior_sd * cfg.sigma_prior_sd;
        double r2 = sigma * sigma / s2;
        nlp += 0.5 * r2 - std::log(kSqrt2OverPi / cfg.sigma_prior_sd) - log_sigma;
        if (g) g[l.logsig_off()] += r2 - 1.0;
    }

    if (cfg.fix_sigma && g) g[l.logsig_off()] = 0.0;
    return nlp;
}

// Second derivative of the negative log joint along each coordinate,
// holding the others fixed (the diagonal of the Hessian).
inline std::vector<double> curvature_diag(const AxisData& data, const ModelConfig& cfg,
                                          const std::vector<double>& param) {
    ParamLayout l = ParamLayout::from(data, cfg);
    if (param.size() != l.size())
        throw std::invalid_argument("model: parameter vector length mismatch");
    const double* p = param.data();
    std::vector<double> diag(l.size(), 0.0);

    double log_sigma = p[l.logsig_off()];
    double sigma = std::exp(log_sigma);
    double inv_s2 = 1.0 / (sigma * sigma);

    for (size_t i = 0; i < data.rows(); ++i) {
        double m = detail::row_mean(data, cfg, l, p, i);
        double z = (data.y[i] - m) / sigma;
        double cm = inv_s2;          // curvature in the mean
        double cs = 2.0 * z * z;     // curvature in log sigma
        if (cfg.truncated) {
            double alpha = m / sigma;
            double h = norm_hazard(alpha);
            double hprime = -h * (alpha + h);
            cm = (1.0 + hprime) * inv_s2;
            cs += alpha * alpha * hprime + alpha * h;
        }
        if (cfg.has_spline) {
            const double* sv =
                &data.spline_vals[i * static_cast<size_t>(data.spline_order)];
            double* dt = diag.data() + static_cast<size_t>(data.horse[i]) * l.B +
                         static_cast<size_t>(data.spline_first[i]);
            for (int k = 0; k < data.spline_order; ++k) dt[k] += cm * sv[k] * sv[k];
        }
        if (l.J) diag[l.jockey_off() + static_cast<size_t>(data.jockey[i])] += cm;
        if (l.C) diag[l.context_off() + static_cast<size_t>(data.context[i])] += cm;
        const double* xr = &data.x[i * l.P];
        for (size_t k = 0; k < l.P; ++k) diag[l.psi_off() + k] += cm * xr[k] * xr[k];
        diag[l.logsig_off()] += cs;
    }

    if (cfg.has_spline) {
        double inv_tau2 = 1.0 / (cfg.theta_prior_sd * cfg.theta_prior_sd);
        for (size_t h = 0; h < l.H; ++h)
            for (size_t b = 0; b < l.B; ++b) diag[h * l.B + b] += inv_tau2;
        for (size_t b = 0; b < l.B; ++b)
            diag[l.mu_off() + b] += static_cast<double>(l.H) * inv_tau2 +
                                    1.0 / (cfg.mu_prior_sd * cfg.mu_prior_sd);
    }
    double inv_d2 = 1.0 / (cfg.delta_prior_sd * cfg.delta_prior_sd);
    for (size_t j = 0; j < l.J; ++j) diag[l.jockey_off() + j] += inv_d2;
    for (size_t c = 0; c < l.C; ++c) diag[l.context_off() + c] += inv_d2;
    double inv_p2 = 1.0 / (cfg.psi_prior_sd * cfg.psi_prior_sd);
    for (size_t k = 0; k < l.P; ++k) diag[l.psi_off() + k] += inv_p2;
    diag[l.logsig_off()] +=
        2.0 * sigma * sigma / (cfg.sigma_prior_sd * cfg.sigma_prior_sd);
    return diag;
}

// Fitted coefficients for one axis: the joint mode plus a per-coordinate
// posterior scale from the curvature at the mode.
struct AxisParams {
    ParamLayout layout;
    std::vector<double> mode;
    std::vector<double> curvature_sd;  // zero entries stay fixed when drawing

    double theta(size_t h, size_t b) const { return mode[h * layout.B + b]; }
    double mu(size_t b) const { return mode[layout.mu_off() + b]; }
    double delta_jockey(size_t j) const { return mode[layout.jockey_off() + j]; }
    double delta_context(size_t c) const { return mode[layout.context_off() + c]; }
    double psi(size_t k) const { return mode[layout.psi_off() + k]; }
    double log_sigma() const { return mode[layout.logsig_off()]; }
    double sigma() const { return std::exp(log_sigma()); }

    std::vector<double> draw(Rng& rng) const {
        std::vector<double> out(mode.size());
        for (size_t i = 0; i < mode.size(); ++i)
            out[i] = curvature_sd[i] > 0.0 ? rng.normal(mode[i], curvature_sd[i])
                                           : mode[i];
        return out;
    }
};

struct FitInfo {
    int iterations = 0;
    bool converged = false;
    double neg_log_posterior = 0.0;
    size_t n_rows = 0;
    std::vector<std::string> warnings;
};

// Everything the simulator needs: entity dictionaries, the distance-curve
// spline, covariate standardization constants, and both fitted axes.
struct FittedParams {
    std::vector<std::string> horses, jockeys, contexts;
    SplineSpec spline_spec;
    Standardizer std_forward, std_lateral;
    AxisParams forward, lateral;
    FitInfo forward_info, lateral_info;

    size_t horse_index(const std::string& id) const { return find(horses, id, "horse"); }
    size_t jockey_index(const std::string& id) const {
        return find(jockeys, id, "jockey");
    }
    size_t context_index(const std::string& id) const {
        return find(contexts, id, "context");
    }

private:
    static size_t find(const std::vector<std::string>& v, const std::string& id,
                       const char* what) {
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i] == id) return i;
        throw std::out_of_range(strprintf("unknown %s id '%s'", what, id.c_str()));
    }
};

// Expected forward step for one horse at cumulative distance j, covariates
// at their average (standardized zero) and no rider/context offset.
inline double profile_value(const FittedParams& params, const BSplineBasis& basis,
                            size_t horse, double j) {
    if (horse >= params.horses.size()) throw std::out_of_range("profile: bad horse index");
    double vals[8];
    int first = basis.row_sparse(j, vals);
    double sum = 0.0;
    for (int k = 0; k < basis.order(); ++k)
        sum += vals[k] *
               params.forward.theta(horse, static_cast<size_t>(first + k));
    return sum;
}

struct JockeyRating {
    std::string jockey_id;
    double rating = 0.0;
};

// Riders ordered by their forward-axis effect, best first; ties fall back to
// the identifier so the order is total.
inline std::vector<JockeyRating> jockey_ratings(const FittedParams& params) {
    std::vector<JockeyRating> out;
    for (size_t j = 0; j < params.jockeys.size(); ++j)
        out.push_back({params.jockeys[j], params.forward.delta_jockey(j)});
    std::sort(out.begin(), out.end(), [](const JockeyRating& a, const JockeyRating& b) {
        if (a.rating != b.rating) return a.rating > b.rating;
        return a.jockey_id < b.jockey_id;
    });
    return out;
}

}  // namespace raceline
