#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "tenfact/tensor.hpp"

namespace tenfact::io {

/// Raw contents of a ".coo" file: header `d1 d2 d3 nnz`, then nnz lines
/// `i j k value` (0-based). Explicit zeros and duplicates are kept verbatim.
struct CooFile {
    Dims dims;
    std::vector<SparseTensor3::Entry> entries;
};

CooFile read_coo_file(std::istream& in);
CooFile read_coo_file(const std::filesystem::path& path);

SparseTensor3 read_coo(const std::filesystem::path& path);

void write_coo(std::ostream& out, const SparseTensor3& t);
void write_coo(std::ostream& out, Dims dims, const std::vector<SparseTensor3::Entry>& entries);
void write_coo(const std::filesystem::path& path, const SparseTensor3& t);
/// Writes every nonzero of a dense tensor.
void write_coo(const std::filesystem::path& path, const DenseTensor3& t);

/// ".cpm": line 1 `d1 d2 d3 k`, line 2 the k weights, then the rows of A, B, C.
CpModel read_cpm(std::istream& in);
CpModel read_cpm(const std::filesystem::path& path);
void write_cpm(std::ostream& out, const CpModel& m);
void write_cpm(const std::filesystem::path& path, const CpModel& m);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace tenfact::io
