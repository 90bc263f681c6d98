#include "pcsim/trajectory_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pcsim {

namespace {

void put(std::string& line, double v) {
    char buf[40];
    if (std::isnan(v)) {
        line += "nan";
        return;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += buf;
}

void put_vec(std::string& line, const Vec& v) {
    for (Index i = 0; i < v.size(); ++i) {
        line += ',';
        put(line, v(i));
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, const std::string& source, std::size_t line_no, std::size_t col) {
    if (cell == "nan" || cell == "-nan") return std::numeric_limits<double>::quiet_NaN();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": column " + std::to_string(col + 1) +
                          ": not a number: '" + cell + "'");
    }
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read " + path);
    return f;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string trajectory_csv_header(Index nu) {
    std::string h = "t";
    for (const char* p : {"V", "I", "u", "y"}) {
        for (Index i = 1; i <= nu; ++i) h += "," + std::string(p) + "_" + std::to_string(i);
    }
    h += ",consensus_error,voltage_avg,V_K,W_K,H_s,margin_K,margin_s";
    return h;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << trajectory_csv_header(traj.nu) << '\n';
    std::string line;
    for (const TrajectoryRow& r : traj.rows) {
        line.clear();
        put(line, r.t);
        put_vec(line, r.V);
        put_vec(line, r.I);
        put_vec(line, r.u);
        put_vec(line, r.y);
        for (double v : {r.consensus_error, r.voltage_avg, r.V_K, r.W_K, r.H_s, r.margin_K, r.margin_s}) {
            line += ',';
            put(line, v);
        }
        out << line << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f = open_out(path);
    write_trajectory_csv(f, traj);
}

Trajectory read_trajectory_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(source + ": empty trajectory file");
    strip_cr(line);
    const std::size_t cols = split(line).size();
    // 1 + 4 nu + 7 columns.
    if (cols < 12 || (cols - 8) % 4 != 0) throw ConfigError(source + ":1: unexpected trajectory header");
    Trajectory traj;
    traj.nu = static_cast<Index>((cols - 8) / 4);
    if (line != trajectory_csv_header(traj.nu)) {
        throw ConfigError(source + ":1: header does not match the trajectory schema");
    }
    const Index n = traj.nu;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != cols) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                              " columns, got " + std::to_string(cells.size()));
        }
        std::size_t c = 0;
        auto next = [&]() {
            const double v = parse_cell(cells[c], source, line_no, c);
            ++c;
            return v;
        };
        auto next_vec = [&]() {
            Vec v(n);
            for (Index i = 0; i < n; ++i) v(i) = next();
            return v;
        };
        TrajectoryRow r;
        r.t = next();
        r.V = next_vec();
        r.I = next_vec();
        r.u = next_vec();
        r.y = next_vec();
        r.consensus_error = next();
        r.voltage_avg = next();
        r.V_K = next();
        r.W_K = next();
        r.H_s = next();
        r.margin_K = next();
        r.margin_s = next();
        traj.rows.push_back(std::move(r));
    }
    return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream f = open_in(path);
    return read_trajectory_csv(f, path);
}

void write_states_csv(std::ostream& out, const Trajectory& traj) {
    const Index dim = traj.rows.empty() ? 0 : traj.rows.front().z.size();
    std::string line = "t";
    for (Index i = 1; i <= dim; ++i) line += ",z_" + std::to_string(i);
    out << line << '\n';
    for (const TrajectoryRow& r : traj.rows) {
        line.clear();
        put(line, r.t);
        put_vec(line, r.z);
        out << line << '\n';
    }
}

void write_states_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f = open_out(path);
    write_states_csv(f, traj);
}

void read_states_csv(std::istream& in, Trajectory& traj, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(source + ": empty state file");
    strip_cr(line);
    const std::size_t cols = split(line).size();
    if (cols < 2) throw ConfigError(source + ":1: state header needs t and at least one state");
    std::size_t k = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != cols) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns");
        }
        if (k >= traj.rows.size()) throw ConfigError(source + ": more state rows than trajectory rows");
        const double t = parse_cell(cells[0], source, line_no, 0);
        if (t != traj.rows[k].t) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": time does not match the trajectory row");
        }
        Vec z(static_cast<Index>(cols - 1));
        for (std::size_t c = 1; c < cols; ++c) z(static_cast<Index>(c - 1)) = parse_cell(cells[c], source, line_no, c);
        traj.rows[k].z = std::move(z);
        ++k;
    }
    if (k != traj.rows.size()) throw ConfigError(source + ": fewer state rows than trajectory rows");
}

void read_states_csv(const std::string& path, Trajectory& traj) {
    std::ifstream f = open_in(path);
    read_states_csv(f, traj, path);
}

}  // namespace pcsim
