// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations the library is checked against. Nothing
// here calls into the library's numeric code.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace oracle {

/// Cumulative products of (1 - beta), accumulated in long double.
inline std::vector<double> alpha_bars(const std::vector<double>& betas)
{
    std::vector<double> out;
    for (std::size_t t = 0; t < betas.size(); ++t) {
        long double p = 1.0L;
        for (std::size_t i = 0; i <= t; ++i) {
            p *= 1.0L - static_cast<long double>(betas[i]);
        }
        out.push_back(static_cast<double>(p));
    }
    return out;
}

/// Plain softmax of -mse with no max shift.
inline std::vector<double> softmax_neg(const std::vector<double>& mse)
{
    long double z = 0.0L;
    for (double m : mse) {
        z += std::exp(-static_cast<long double>(m));
    }
    std::vector<double> out;
    for (double m : mse) {
        out.push_back(static_cast<double>(std::exp(-static_cast<long double>(m)) / z));
    }
    return out;
}

/// Frechet distance from means/covariances via the general eigenvalues of
/// S_a S_b (non-symmetric path).
inline double frechet(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& s_a, const Eigen::VectorXd& mu_b,
                      const Eigen::MatrixXd& s_b)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(s_a * s_b, false);
    double tr_sqrt = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()[k].real()));
    }
    return (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * tr_sqrt;
}

/// Unbiased covariance of the rows of X plus `shrinkage` on the diagonal.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const Eigen::MatrixXd& x, double shrinkage)
{
    const Eigen::VectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
    Eigen::MatrixXd s = c.transpose() * c / static_cast<double>(x.rows() - 1);
    s.diagonal().array() += shrinkage;
    return {mu, s};
}

inline double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double shrinkage)
{
    const auto [ma, sa] = moments(a, shrinkage);
    const auto [mb, sb] = moments(b, shrinkage);
    return frechet(ma, sa, mb, sb);
}

/// Lowercase whitespace token sets are disjoint.
inline bool disjoint(const std::string& a, const std::string& b)
{
    auto toks = [](const std::string& s) {
        std::map<std::string, int> m;
        std::string cur;
        for (char ch : s + " ") {
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!cur.empty()) {
                    m[cur] = 1;
                }
                cur.clear();
            } else {
                cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            }
        }
        return m;
    };
    const auto ta = toks(a);
    for (const auto& [t, _] : toks(b)) {
        if (ta.count(t) != 0) {
            return false;
        }
    }
    return true;
}

} // namespace oracle
