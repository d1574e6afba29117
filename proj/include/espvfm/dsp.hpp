#pragma once

#include <span>
#include <vector>

#include "espvfm/timeseries.hpp"

namespace espvfm {

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

struct FilterDesign {
    int order = 0;
    double cutoff_hz = 0;
    double sample_rate_hz = 0;
    std::vector<Biquad> sections;
};

/// Digital Butterworth low-pass: bilinear transform with cutoff prewarping,
/// realized as second-order sections (plus one first-order for odd orders).
FilterDesign design_butterworth(int order, double cutoff_hz, double sample_rate_hz);

/// Causal single pass. With steady_init the section states start at the
/// steady state for the first sample instead of zero.
std::vector<double> filter_signal(const FilterDesign& d, std::span<const double> x,
                                  bool steady_init = false);

/// Filters every channel (or only `channels` if given). Sampling must be
/// uniform at the design rate.
TimeSeries butterworth_lowpass(const TimeSeries& ts, const FilterDesign& d,
                               bool steady_init = false,
                               const std::vector<std::string>& channels = {});

/// Keeps samples 0, factor, 2*factor, ...
TimeSeries downsample(const TimeSeries& ts, int factor);

/// |H(e^{j 2 pi f / fs})|
double magnitude_response(const FilterDesign& d, double f_hz);

}  // namespace espvfm
