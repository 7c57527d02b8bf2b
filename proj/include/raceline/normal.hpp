#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

// Gaussian density/CDF helpers. The scaled complement erfcx is the shared
// primitive so that log_norm_cdf and norm_hazard stay consistent with each
// other far into the lower tail.

namespace raceline {

inline constexpr double kLog2Pi = 1.8378770664093454836;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)

// exp(x^2) * erfc(x) for x >= 0 without overflow.
inline double erfcx(double x) {
    if (x < 20.0) return std::exp(x * x) * std::erfc(x);
    // asymptotic series, relative error < 1e-10 for x >= 20
    double z = 1.0 / (2.0 * x * x);
    double s = 1.0 + z * (-1.0 + z * (3.0 - z * (15.0 - z * 105.0)));
    return s / (x * 1.7724538509055160273);  // sqrt(pi)
}

inline double norm_pdf(double z) { return std::exp(-0.5 * z * z - 0.5 * kLog2Pi); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

inline double log_norm_pdf(double x, double mean, double sd) {
    double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * kLog2Pi;
}

inline double log_norm_cdf(double z) {
    if (z >= -1.0) return std::log(norm_cdf(z));
    return -0.5 * z * z - 0.69314718055994530942 + std::log(erfcx(-z * kInvSqrt2));
}

// pdf(z) / cdf(z); stable for z << 0 where both vanish.
inline double norm_hazard(double z) {
    if (z >= -1.0) return norm_pdf(z) / norm_cdf(z);
    return kSqrt2OverPi / erfcx(-z * kInvSqrt2);
}

// Inverse standard normal CDF (Wichura's PPND16 rational approximations).
inline double inv_norm_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inv_norm_cdf: p must be in (0, 1)");
    double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        double r = 0.180625 - q * q;
        double num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                           6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                         1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                       1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        double den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                           3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                         5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                       4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                           2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                         3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                       4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                           1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                         6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                       2.05319162663775882187e0) * r + 1.0);
        x = num / den;
    } else {
        r -= 5.0;
        double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                           1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                         2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                       5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                           1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                         1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                       5.99832206555887937690e-1) * r + 1.0);
        x = num / den;
    }
    return (q < 0.0) ? -x : x;
}

}  // namespace raceline
