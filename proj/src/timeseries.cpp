#include "espvfm/timeseries.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "espvfm/errors.hpp"

namespace espvfm {

int TimeSeries::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

const std::vector<double>& TimeSeries::operator[](std::string_view name) const {
    const int i = index_of(name);
    if (i < 0) throw ValidationError("unknown channel '" + std::string(name) + "'");
    return data[i];
}

std::vector<double>& TimeSeries::operator[](std::string_view name) {
    const int i = index_of(name);
    if (i < 0) throw ValidationError("unknown channel '" + std::string(name) + "'");
    return data[i];
}

void TimeSeries::add(std::string name, std::vector<double> values) {
    if (values.size() != t.size())
        throw ValidationError("channel '" + name + "' has " + std::to_string(values.size()) +
                              " samples, expected " + std::to_string(t.size()));
    if (const int i = index_of(name); i >= 0) {
        data[i] = std::move(values);
        return;
    }
    names.push_back(std::move(name));
    data.push_back(std::move(values));
}

TimeSeries TimeSeries::select(const std::vector<std::string>& channels) const {
    TimeSeries out;
    out.t = t;
    out.flags = flags;
    for (const auto& c : channels) out.add(c, (*this)[c]);
    return out;
}

void TimeSeries::validate() const {
    if (names.size() != data.size()) throw ValidationError("channel names and columns disagree");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]))
            throw ValidationError("time at row " + std::to_string(i) + " is not finite");
        if (i > 0 && !(t[i] > t[i - 1]))
            throw ValidationError("times not strictly increasing at row " + std::to_string(i));
    }
    for (std::size_t c = 0; c < data.size(); ++c) {
        if (data[c].size() != t.size())
            throw ValidationError("channel '" + names[c] + "' length mismatch");
        for (std::size_t i = 0; i < t.size(); ++i)
            if (!std::isfinite(data[c][i]))
                throw ValidationError("channel '" + names[c] + "' not finite at row " +
                                      std::to_string(i));
    }
}

std::string channel_unit(std::string_view name) {
    const auto pos = name.rfind('_');
    return pos == std::string_view::npos ? std::string() : std::string(name.substr(pos + 1));
}

bool is_uniform(const std::vector<double>& t, double dt, double jitter) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(t[i] - (t[0] + static_cast<double>(i) * dt)) > jitter) return false;
    return true;
}

namespace {

void put_double(std::ostream& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& source) {
    double v = 0;
    const auto* end = cell.data() + cell.size();
    const auto res = std::from_chars(cell.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw ValidationError(source + ": row " + std::to_string(row) + ": cannot parse '" + cell +
                              "'");
    return v;
}

}  // namespace

void write_csv(const TimeSeries& ts, std::ostream& out) {
    out << "t_s";
    for (const auto& n : ts.names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < ts.size(); ++i) {
        put_double(out, ts.t[i]);
        for (const auto& col : ts.data) {
            out << ',';
            put_double(out, col[i]);
        }
        out << '\n';
    }
}

void write_csv(const TimeSeries& ts, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    write_csv(ts, out);
}

TimeSeries read_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(source + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "t_s")
        throw ValidationError(source + ": first column must be 't_s'");
    TimeSeries ts;
    ts.names.assign(header.begin() + 1, header.end());
    ts.data.resize(ts.names.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError(source + ": row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
        const double t = parse_cell(cells[0], row, source);
        if (!ts.t.empty() && !(t > ts.t.back()))
            throw ValidationError(source + ": row " + std::to_string(row) +
                                  ": time not strictly increasing");
        ts.t.push_back(t);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const double v = parse_cell(cells[c], row, source);
            if (!std::isfinite(v))
                throw ValidationError(source + ": row " + std::to_string(row) + ": non-finite '" +
                                      header[c] + "'");
            ts.data[c - 1].push_back(v);
        }
    }
    return ts;
}

TimeSeries read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return read_csv(in, path.string());
}

}  // namespace espvfm
