#include "ktnas/stats.hpp"

#include <algorithm>
#include <cmath>

#include "ktnas/errors.hpp"

namespace ktnas {

double mean(const std::vector<double>& v) {
    if (v.empty()) throw ContractError("mean of an empty sample");
    double sum = 0.0;
    for (double value : v) sum += value;
    return sum / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double sum = 0.0;
    for (double value : v) sum += (value - m) * (value - m);
    return std::sqrt(sum / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ContractError("quantile of an empty sample");
    if (q < 0.0 || q > 1.0) throw ContractError("quantile point outside [0, 1]");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MannWhitneyResult mann_whitney_less(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw ContractError("Mann-Whitney needs two non-empty samples");
    const std::size_t nx = x.size(), ny = y.size(), n = nx + ny;

    struct Tagged {
        double value;
        bool from_x;
    };
    std::vector<Tagged> pooled;
    pooled.reserve(n);
    for (double value : x) pooled.push_back({value, true});
    for (double value : y) pooled.push_back({value, false});
    std::sort(pooled.begin(), pooled.end(), [](const Tagged& a, const Tagged& b) { return a.value < b.value; });

    // Midranks with tie bookkeeping for the variance correction.
    double rank_sum_x = 0.0;
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && pooled[j].value == pooled[i].value) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        const auto run = static_cast<double>(j - i);
        tie_term += run * run * run - run;
        for (std::size_t k = i; k < j; ++k)
            if (pooled[k].from_x) rank_sum_x += midrank;
        i = j;
    }

    const double nxd = static_cast<double>(nx), nyd = static_cast<double>(ny), nd = static_cast<double>(n);
    MannWhitneyResult result;
    result.u = rank_sum_x - nxd * (nxd + 1.0) / 2.0;

    const double mean_u = nxd * nyd / 2.0;
    const double variance = nxd * nyd / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
    if (variance <= 0.0) {  // every observation identical: no evidence either way
        result.z = 0.0;
        result.p_one_sided = 0.5;
        return result;
    }
    // Small U supports H1 (x smaller); continuity correction toward the mean.
    result.z = (result.u - mean_u + 0.5) / std::sqrt(variance);
    result.p_one_sided = normal_cdf(result.z);
    return result;
}

}  // namespace ktnas
