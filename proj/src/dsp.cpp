#include "espvfm/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "espvfm/errors.hpp"

namespace espvfm {

FilterDesign design_butterworth(int order, double cutoff_hz, double fs) {
    if (order < 1) throw ValidationError("filter order must be >= 1");
    if (!(fs > 0)) throw ValidationError("sample rate must be positive");
    if (!(cutoff_hz > 0 && cutoff_hz < fs / 2))
        throw ValidationError("cutoff must lie in (0, fs/2)");
    FilterDesign d{order, cutoff_hz, fs, {}};
    const double k = std::tan(std::numbers::pi * cutoff_hz / fs);
    const double k2 = k * k;
    for (int i = 0; i < order / 2; ++i) {
        const double theta = std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order);
        const double q = 2.0 * std::sin(theta);
        const double a0 = 1.0 + q * k + k2;
        Biquad s;
        s.b0 = k2 / a0;
        s.b1 = 2.0 * k2 / a0;
        s.b2 = k2 / a0;
        s.a1 = 2.0 * (k2 - 1.0) / a0;
        s.a2 = (1.0 - q * k + k2) / a0;
        d.sections.push_back(s);
    }
    if (order % 2 == 1) {
        Biquad s;
        s.b0 = k / (1.0 + k);
        s.b1 = s.b0;
        s.a1 = (k - 1.0) / (k + 1.0);
        d.sections.push_back(s);
    }
    return d;
}

std::vector<double> filter_signal(const FilterDesign& d, std::span<const double> x,
                                  bool steady_init) {
    std::vector<double> y(x.begin(), x.end());
    if (y.empty()) return y;
    for (const auto& s : d.sections) {
        double z1 = 0, z2 = 0;
        if (steady_init) {
            const double c = y[0];
            z2 = (s.b2 - s.a2) * c;
            z1 = (s.b1 - s.a1) * c + z2;
        }
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

TimeSeries butterworth_lowpass(const TimeSeries& ts, const FilterDesign& d, bool steady_init,
                               const std::vector<std::string>& channels) {
    if (!is_uniform(ts.t, 1.0 / d.sample_rate_hz, 1e-9))
        throw ValidationError("series is not uniformly sampled at " +
                              std::to_string(d.sample_rate_hz) + " Hz");
    TimeSeries out = ts;
    for (std::size_t c = 0; c < out.names.size(); ++c) {
        if (!channels.empty() &&
            std::find(channels.begin(), channels.end(), out.names[c]) == channels.end())
            continue;
        out.data[c] = filter_signal(d, out.data[c], steady_init);
    }
    return out;
}

TimeSeries downsample(const TimeSeries& ts, int factor) {
    if (factor < 1) throw ValidationError("downsample factor must be >= 1");
    TimeSeries out;
    out.names = ts.names;
    out.flags = ts.flags;
    out.data.resize(ts.data.size());
    for (std::size_t i = 0; i < ts.size(); i += static_cast<std::size_t>(factor)) {
        out.t.push_back(ts.t[i]);
        for (std::size_t c = 0; c < ts.data.size(); ++c) out.data[c].push_back(ts.data[c][i]);
    }
    return out;
}

double magnitude_response(const FilterDesign& d, double f_hz) {
    const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * f_hz / d.sample_rate_hz);
    const std::complex<double> zi = 1.0 / z;
    std::complex<double> h = 1.0;
    for (const auto& s : d.sections)
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    return std::abs(h);
}

}  // namespace espvfm
