#include "tenfact/io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "tenfact/error.hpp"

namespace tenfact::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(fmt::format("cannot open '{}' for reading", path.string()));
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument(fmt::format("cannot open '{}' for writing", path.string()));
    return out;
}

/// Next non-empty line split into a stream; fails on EOF.
std::istringstream next_line(std::istream& in, const char* what) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw InvalidArgument(fmt::format("unexpected end of input while reading {}", what));
}

template <typename T>
T take(std::istringstream& s, const char* what) {
    T v{};
    if (!(s >> v)) throw InvalidArgument(fmt::format("malformed {}", what));
    return v;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{}", v); }

CooFile read_coo_file(std::istream& in) {
    auto header = next_line(in, "coo header");
    CooFile f;
    f.dims.d1 = take<Index>(header, "coo header");
    f.dims.d2 = take<Index>(header, "coo header");
    f.dims.d3 = take<Index>(header, "coo header");
    const auto nnz = take<long long>(header, "coo header");
    if (f.dims.d1 <= 0 || f.dims.d2 <= 0 || f.dims.d3 <= 0 || nnz < 0) {
        throw InvalidArgument("coo header must have positive dimensions and non-negative nnz");
    }
    f.entries.reserve(static_cast<std::size_t>(nnz));
    for (long long n = 0; n < nnz; ++n) {
        auto line = next_line(in, "coo entry");
        SparseTensor3::Entry e{};
        e.i = take<Index>(line, "coo entry");
        e.j = take<Index>(line, "coo entry");
        e.k = take<Index>(line, "coo entry");
        e.value = take<double>(line, "coo entry");
        if (e.i < 0 || e.i >= f.dims.d1 || e.j < 0 || e.j >= f.dims.d2 || e.k < 0 || e.k >= f.dims.d3) {
            throw InvalidArgument(fmt::format("coo entry {} ({}, {}, {}) out of range", n, e.i, e.j, e.k));
        }
        f.entries.push_back(e);
    }
    return f;
}

CooFile read_coo_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_coo_file(in);
}

SparseTensor3 read_coo(const std::filesystem::path& path) {
    auto f = read_coo_file(path);
    return SparseTensor3(f.dims, std::move(f.entries));
}

void write_coo(std::ostream& out, Dims dims, const std::vector<SparseTensor3::Entry>& entries) {
    out << fmt::format("{} {} {} {}\n", dims.d1, dims.d2, dims.d3, entries.size());
    for (const auto& e : entries) out << fmt::format("{} {} {} {}\n", e.i, e.j, e.k, format_double(e.value));
}

void write_coo(std::ostream& out, const SparseTensor3& t) {
    write_coo(out, t.dims(), std::vector<SparseTensor3::Entry>(t.entries().begin(), t.entries().end()));
}

void write_coo(const std::filesystem::path& path, const SparseTensor3& t) {
    auto out = open_out(path);
    write_coo(out, t);
}

void write_coo(const std::filesystem::path& path, const DenseTensor3& t) { write_coo(path, sparsify(t)); }

CpModel read_cpm(std::istream& in) {
    auto header = next_line(in, "cpm header");
    const auto d1 = take<Index>(header, "cpm header");
    const auto d2 = take<Index>(header, "cpm header");
    const auto d3 = take<Index>(header, "cpm header");
    const auto k = take<Index>(header, "cpm header");
    if (d1 <= 0 || d2 <= 0 || d3 <= 0 || k < 0) throw InvalidArgument("cpm header must have positive dims, k >= 0");

    CpModel m;
    m.weights.resize(k);
    {
        auto line = k > 0 ? next_line(in, "cpm weights") : std::istringstream{};
        for (Index r = 0; r < k; ++r) m.weights[r] = take<double>(line, "cpm weights");
    }
    auto read_factor = [&](Index rows, const char* what) {
        Matrix F(rows, k);
        for (Index i = 0; i < rows; ++i) {
            if (k == 0) continue;
            auto line = next_line(in, what);
            for (Index r = 0; r < k; ++r) F(i, r) = take<double>(line, what);
        }
        return F;
    };
    m.A = read_factor(d1, "cpm factor A");
    m.B = read_factor(d2, "cpm factor B");
    m.C = read_factor(d3, "cpm factor C");
    m.validate(1e-9);
    return m;
}

CpModel read_cpm(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_cpm(in);
}

void write_cpm(std::ostream& out, const CpModel& m) {
    const Dims d = m.dims();
    out << fmt::format("{} {} {} {}\n", d.d1, d.d2, d.d3, m.rank());
    auto write_row = [&](auto&& row) {
        for (Index r = 0; r < row.size(); ++r) out << (r ? " " : "") << format_double(row[r]);
        out << '\n';
    };
    if (m.rank() > 0) {
        write_row(m.weights);
        for (const Matrix* f : {&m.A, &m.B, &m.C})
            for (Index i = 0; i < f->rows(); ++i) write_row(f->row(i));
    }
}

void write_cpm(const std::filesystem::path& path, const CpModel& m) {
    auto out = open_out(path);
    write_cpm(out, m);
}

}  // namespace tenfact::io
