#include "lcmito/csvio.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lcmito::csvio {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

[[noreturn]] void fail_line(const std::string& path, long line, const std::string& what) {
    std::ostringstream msg;
    msg << path << ":" << line << ": " << what;
    throw ValidationError(msg.str());
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& field, const std::string& path, long line) {
    if (field.empty()) fail_line(path, line, "missing cell");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) {
        fail_line(path, line, "non-numeric cell '" + field + "'");
    }
    return v;
}

long parse_id(const std::string& field, const std::string& path, long line) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(field.c_str(), &end, 10);
    if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE) {
        fail_line(path, line, "bad trajectory id '" + field + "'");
    }
    return v;
}

}  // namespace

void emit_trajectories(const TrajectorySet& data, const std::string& path) {
    data.validate();
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << "traj_id,t";
    for (int i = 1; i <= data.dim; ++i) out << ",x_" << i;
    out << "\n";
    for (int j = 0; j < data.n_traj(); ++j) {
        const Matrix& traj = data.traj(j);
        for (int k = 0; k <= data.grid.n_steps; ++k) {
            out << (j + 1) << ',' << format_double(k * data.grid.delta);
            for (int i = 0; i < data.dim; ++i) out << ',' << format_double(traj(k, i));
            out << "\n";
        }
    }
    if (!out) throw ValidationError("write failed: " + path);
}

TrajectorySet ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open: " + path);
    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_fields(line);
    if (header.size() < 3 || header[0] != "traj_id" || header[1] != "t") {
        fail_line(path, line_no, "header must be traj_id,t,x_1,...,x_d");
    }
    const int d = static_cast<int>(header.size()) - 2;
    for (int i = 0; i < d; ++i) {
        if (header[static_cast<std::size_t>(i) + 2] != "x_" + std::to_string(i + 1)) {
            fail_line(path, line_no, "unexpected coordinate column '" + header[static_cast<std::size_t>(i) + 2] + "'");
        }
    }

    TrajectorySet data;
    data.dim = d;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> rows;
    long current_id = 0;
    long expected_rows = -1;
    double delta = 0.0;

    auto flush_trajectory = [&](long closing_line) {
        if (rows.empty()) return;
        if (expected_rows >= 0 && static_cast<long>(rows.size()) != expected_rows) {
            fail_line(path, closing_line, "ragged trajectory: expected " + std::to_string(expected_rows) +
                                              " rows per trajectory, trajectory " + std::to_string(current_id) +
                                              " has " + std::to_string(rows.size()));
        }
        if (rows.size() < 2) fail_line(path, closing_line, "trajectory needs at least two grid points");
        if (expected_rows < 0) {
            expected_rows = static_cast<long>(rows.size());
            delta = times[1] - times[0];
            if (!(delta > 0.0)) fail_line(path, closing_line, "grid is not increasing");
            data.grid.delta = delta;
            data.grid.n_steps = static_cast<int>(rows.size()) - 1;
        }
        for (std::size_t k = 1; k < times.size(); ++k) {
            const double spacing = times[k] - times[k - 1];
            if (std::abs(spacing - delta) > 1e-9 * std::max(1.0, std::abs(delta))) {
                fail_line(path, closing_line, "non-uniform grid in trajectory " + std::to_string(current_id));
            }
        }
        Matrix traj(static_cast<Eigen::Index>(rows.size()), d);
        for (std::size_t k = 0; k < rows.size(); ++k) traj.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
        data.paths.push_back(std::move(traj));
        times.clear();
        rows.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (static_cast<int>(fields.size()) != d + 2) {
            fail_line(path, line_no,
                      "expected " + std::to_string(d + 2) + " cells, got " + std::to_string(fields.size()));
        }
        const long id = parse_id(fields[0], path, line_no);
        if (rows.empty() && data.paths.empty()) {
            if (id != 1) fail_line(path, line_no, "trajectory ids must start at 1");
            current_id = id;
        } else if (id != current_id) {
            if (id != current_id + 1) {
                fail_line(path, line_no, "trajectory ids must be contiguous (jumped from " +
                                             std::to_string(current_id) + " to " + std::to_string(id) + ")");
            }
            flush_trajectory(line_no);
            current_id = id;
        }
        times.push_back(parse_double(fields[1], path, line_no));
        Eigen::VectorXd row(d);
        for (int i = 0; i < d; ++i) row(i) = parse_double(fields[static_cast<std::size_t>(i) + 2], path, line_no);
        rows.push_back(std::move(row));
    }
    flush_trajectory(line_no);
    if (data.paths.empty()) throw ValidationError(path + ": no data rows");
    data.validate();
    return data;
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(parse_double(f, path, line_no));
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail_line(path, line_no, "inconsistent row length");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": empty matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

void write_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << "\n";
    }
}

void write_gamma_csv(const std::vector<double>& gamma, const sdesim::TimeGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << "t,gamma\n";
    for (std::size_t k = 0; k < gamma.size(); ++k) {
        out << format_double(static_cast<double>(k) * grid.delta) << ',' << format_double(gamma[k]) << "\n";
    }
}

}  // namespace lcmito::csvio
