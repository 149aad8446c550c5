#pragma once

#include <utility>
#include <vector>

namespace ktnas {

double mean(const std::vector<double>& v);
double sample_stddev(const std::vector<double>& v);  // 0 for n < 2

// Linear-interpolation quantile of a copy of v; q in [0, 1].
double quantile(std::vector<double> v, double q);
double median(std::vector<double> v);

struct MannWhitneyResult {
    double u = 0.0;            // U statistic of the first sample
    double z = 0.0;            // tie-corrected normal approximation
    double p_one_sided = 1.0;  // P(first sample stochastically smaller)
};

// One-sided Mann-Whitney U, H1: x tends to be smaller than y. Midranks for
// ties, tie-corrected variance, continuity correction.
MannWhitneyResult mann_whitney_less(const std::vector<double>& x, const std::vector<double>& y);

double normal_cdf(double z);

}  // namespace ktnas
