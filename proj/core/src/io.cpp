#include "swed/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>
#include <vector>

#include "swed/errors.hpp"

namespace swed {

namespace {

constexpr std::array<unsigned char, 5> kMagic = {0x53, 0x57, 0x45, 0x44, 0x31}; // "SWED1"
constexpr unsigned char kDtypeF64 = 0;

void put_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64_le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void put_f64_le(std::ostream& out, double d) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    put_u64_le(out, bits);
}

double get_f64_le(std::istream& in) {
    return std::bit_cast<double>(get_u64_le(in));
}

Matrix read_binary(std::istream& in, const std::filesystem::path& path) {
    in.seekg(static_cast<std::streamoff>(kMagic.size()));
    char dtype = 0;
    in.read(&dtype, 1);
    if (!in || static_cast<unsigned char>(dtype) != kDtypeF64)
        throw IoError(path.string() + ": unsupported dtype tag");
    const std::uint64_t rows = get_u64_le(in);
    const std::uint64_t cols = get_u64_le(in);
    if (!in) throw IoError(path.string() + ": truncated header");
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = get_f64_le(in);
        if (!in) throw IoError(path.string() + ": truncated payload");
    }
    return m;
}

Matrix read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open");
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> row;
        double v = 0.0;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) throw IoError(path.string() + ": malformed numeric literal");
        if (row.empty()) continue; // blank line
        if (rows == 0) {
            cols = row.size();
        } else if (row.size() != cols) {
            throw IoError(path.string() + ": ragged row " + std::to_string(rows));
        }
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    Matrix m(rows, cols);
    std::memcpy(m.data(), values.data(), values.size() * sizeof(double));
    return m;
}

} // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw IoError("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, MatrixFormat format) {
    if (format == MatrixFormat::binary) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError(path.string() + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(kMagic.data()),
                  static_cast<std::streamsize>(kMagic.size()));
        out.put(static_cast<char>(kDtypeF64));
        put_u64_le(out, m.rows());
        put_u64_le(out, m.cols());
        for (std::size_t i = 0; i < m.size(); ++i) put_f64_le(out, m.data()[i]);
        if (!out) throw IoError(path.string() + ": write failed");
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out.put(' ');
            out << format_double(m(i, j));
        }
        out.put('\n');
    }
    if (!out) throw IoError(path.string() + ": write failed");
}

Matrix read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open");
    std::array<unsigned char, 5> head{};
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    Matrix m;
    if (in && head == kMagic) {
        m = read_binary(in, path);
    } else {
        in.close();
        m = read_text(path);
    }
    if (!m.all_finite()) throw IoError(path.string() + ": non-finite entries");
    return m;
}

} // namespace swed
