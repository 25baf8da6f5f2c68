// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdrf {

double WeightPdf::total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

namespace {

void validate_pdf(const WeightPdf& pdf) {
    if (pdf.bin_edges.size() != pdf.weights.size() + 1 || pdf.weights.empty())
        throw std::invalid_argument("weight pdf needs N weights and N+1 edges");
    for (std::size_t i = 0; i + 1 < pdf.bin_edges.size(); ++i) {
        if (!(pdf.bin_edges[i] < pdf.bin_edges[i + 1]))
            throw std::invalid_argument("pdf bin edges must be strictly increasing");
    }
    for (double w : pdf.weights) {
        if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("pdf weights must be finite and >= 0");
    }
}

void validate_kernel(const Kernel& kernel) {
    if (kernel.taps.empty() || kernel.taps.size() % 2 == 0)
        throw std::invalid_argument("kernel length must be odd");
    double s = 0.0;
    for (double k : kernel.taps) {
        if (k < 0.0 || !std::isfinite(k)) throw std::invalid_argument("kernel taps must be finite and >= 0");
        s += k;
    }
    if (s <= 0.0) throw std::invalid_argument("kernel tap sum must be positive");
}

}  // namespace

WeightPdf kernel_smooth(const WeightPdf& pdf, const Kernel& kernel) {
    validate_pdf(pdf);
    validate_kernel(kernel);
    const int n = int(pdf.weights.size());
    const int m = int(kernel.taps.size());
    const int half = m / 2;
    double tap_sum = 0.0;
    for (double k : kernel.taps) tap_sum += k;

    WeightPdf out;
    out.bin_edges = pdf.bin_edges;
    out.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
            const int src = std::clamp(i + j - half, 0, n - 1);
            acc += kernel.taps[j] * pdf.weights[src];
        }
        out.weights[i] = acc / tap_sum;
    }
    return out;
}

ImportanceResult importance_sample(const WeightPdf& pdf, int n_fine, Pcg32& rng) {
    if (n_fine < 1) throw std::invalid_argument("n_fine must be >= 1");
    std::vector<double> us(std::size_t(n_fine), 0.0);
    for (double& u : us) u = rng.next_double();
    return importance_sample_with(pdf, us);
}

ImportanceResult importance_sample_with(const WeightPdf& pdf, const std::vector<double>& uniforms) {
    validate_pdf(pdf);
    ImportanceResult res;
    res.positions.reserve(uniforms.size());

    const double lo = pdf.bin_edges.front();
    const double hi = pdf.bin_edges.back();
    const double total = pdf.total_weight();
    if (total <= 0.0) {
        res.degenerate_fallback = true;
        for (double u : uniforms) res.positions.push_back(lo + u * (hi - lo));
        std::sort(res.positions.begin(), res.positions.end());
        return res;
    }

    std::vector<double> cdf(pdf.weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pdf.weights.size(); ++i) {
        acc += pdf.weights[i];
        cdf[i] = acc;
    }

    for (double u : uniforms) {
        const double target = u * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        const std::size_t k = std::min(std::size_t(it - cdf.begin()), pdf.weights.size() - 1);
        const double below = k == 0 ? 0.0 : cdf[k - 1];
        const double w = pdf.weights[k];
        const double frac = w > 0.0 ? (target - below) / w : 0.0;
        const double a = pdf.bin_edges[k];
        const double b = pdf.bin_edges[k + 1];
        res.positions.push_back(a + std::clamp(frac, 0.0, 1.0) * (b - a));
    }
    std::sort(res.positions.begin(), res.positions.end());
    return res;
}

std::vector<double> merge_sorted(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    std::vector<double> merged;
    merged.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
    std::vector<double> out;
    out.reserve(merged.size());
    for (double v : merged) {
        if (out.empty() || v - out.back() > tol) out.push_back(v);
    }
    return out;
}

}  // namespace sdrf
