#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace espvfm {

/// Sampled signals sharing one time axis. Channel names carry their unit as
/// a suffix after the last underscore (P1_Pa, omega_rads, ...).
struct TimeSeries {
    std::vector<double> t;
    std::vector<std::string> names;
    std::vector<std::vector<double>> data;
    std::set<std::string> flags;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
    int index_of(std::string_view name) const;
    bool has(std::string_view name) const { return index_of(name) >= 0; }

    const std::vector<double>& operator[](std::string_view name) const;
    std::vector<double>& operator[](std::string_view name);

    void add(std::string name, std::vector<double> values);
    TimeSeries select(const std::vector<std::string>& channels) const;

    /// Strictly increasing times, equal lengths, finite values.
    void validate() const;
};

/// "P1_Pa" -> "Pa"; empty if there is no suffix.
std::string channel_unit(std::string_view name);

bool is_uniform(const std::vector<double>& t, double dt, double jitter = 1e-9);

void write_csv(const TimeSeries& ts, std::ostream& out);
void write_csv(const TimeSeries& ts, const std::filesystem::path& path);
TimeSeries read_csv(std::istream& in, const std::string& source = "<stream>");
TimeSeries read_csv(const std::filesystem::path& path);

}  // namespace espvfm
