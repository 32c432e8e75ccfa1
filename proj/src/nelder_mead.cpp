#include "fatigue/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fatigue::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isnan(v) ? kInf : v; }

} // namespace

NelderMeadResult nelder_mead(const Objective& f, std::span<const double> x0, const NelderMeadOptions& options) {
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");

    const double nd = static_cast<double>(n);
    const double rho = 1.0;
    const double chi = options.adaptive ? 1.0 + 2.0 / nd : 2.0;
    const double psi = options.adaptive ? 0.75 - 1.0 / (2.0 * nd) : 0.5;
    const double sigma = options.adaptive ? 1.0 - 1.0 / nd : 0.5;

    std::size_t evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return sanitize(f(x));
    };

    std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += options.initial_step;
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    bool converged = false;

    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        std::vector<std::vector<double>> s(n + 1);
        std::vector<double> v(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s[i] = std::move(simplex[order[i]]);
            v[i] = values[order[i]];
        }
        simplex = std::move(s);
        values = std::move(v);
    };

    while (evals < options.max_evaluations) {
        sort_simplex();

        double xspread = 0.0, fspread = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                xspread = std::max(xspread, std::abs(simplex[i][j] - simplex[0][j]));
            fspread = std::max(fspread, std::abs(values[i] - values[0]));
        }
        if (std::isfinite(values[0]) && xspread <= options.xatol && fspread <= options.fatol) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / nd;

        const auto& worst = simplex[n];
        for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + rho * (centroid[j] - worst[j]);
        const double fr = eval(xr);

        if (fr < values[0]) {
            for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + chi * (xr[j] - centroid[j]);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if (fr < values[n - 1]) {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }

        bool shrink = false;
        if (fr < values[n]) {
            for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + psi * (xr[j] - centroid[j]);
            const double fc = eval(xc);
            if (fc <= fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                shrink = true;
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] - psi * (centroid[j] - worst[j]);
            const double fc = eval(xc);
            if (fc < values[n]) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                shrink = true;
            }
        }
        if (shrink) {
            for (std::size_t i = 1; i <= n; ++i) {
                for (std::size_t j = 0; j < n; ++j)
                    simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                values[i] = eval(simplex[i]);
            }
        }
    }
    sort_simplex();
    return {simplex[0], values[0], evals, converged};
}

NelderMeadResult multi_start_nelder_mead(const Objective& f, const std::vector<std::vector<double>>& starts,
                                         const NelderMeadOptions& options) {
    if (starts.empty()) throw std::invalid_argument("multi_start_nelder_mead: no start points");
    NelderMeadResult best;
    best.value = kInf;
    std::size_t total = 0;
    for (const auto& s : starts) {
        auto r = nelder_mead(f, s, options);
        total += r.evaluations;
        if (best.x.empty() || r.value < best.value) best = std::move(r);
    }
    best.evaluations = total;
    return best;
}

} // namespace fatigue::optim
