// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sdrf/rng.hpp"

namespace sdrf {

/// Unnormalized piecewise-constant density over contiguous bins along a ray.
struct WeightPdf {
    std::vector<double> bin_edges;  // size N+1, strictly increasing
    std::vector<double> weights;    // size N, all >= 0

    double total_weight() const;
    bool degenerate() const { return total_weight() <= 0.0; }
};

/// Odd-length non-negative smoothing taps. Defaults to a 3-tap box.
struct Kernel {
    std::vector<double> taps{1.0, 1.0, 1.0};
};

/// Moving average of the bin weights with replicate (clamp-to-edge) padding,
/// normalized by the tap sum. Bin edges pass through untouched.
WeightPdf kernel_smooth(const WeightPdf& pdf, const Kernel& kernel);

struct ImportanceResult {
    std::vector<double> positions;  // sorted
    bool degenerate_fallback = false;
};

/// Inverse-CDF sampling of the normalized pdf, uniform within each bin.
/// A degenerate (all-zero) pdf falls back to uniform over the full range.
ImportanceResult importance_sample(const WeightPdf& pdf, int n_fine, Pcg32& rng);

/// Deterministic core of importance_sample: one sample per provided uniform
/// in [0,1). Output is sorted.
ImportanceResult importance_sample_with(const WeightPdf& pdf, const std::vector<double>& uniforms);

/// Merges two sorted position lists into one strictly increasing list,
/// collapsing values closer than tol to the previously kept one.
std::vector<double> merge_sorted(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-9);

}  // namespace sdrf
