#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <zlib.h>

#include "error.hpp"

namespace sresnet {

struct Dataset {
    Eigen::MatrixXd inputs; // n x d
    std::vector<int> targets;
    std::string split = "train";

    long size() const { return inputs.rows(); }
    long dim() const { return inputs.cols(); }
    int num_classes() const { return targets.empty() ? 0 : *std::max_element(targets.begin(), targets.end()) + 1; }
};

enum class DataFormat { idx, csv };

namespace detail {

// Reads plain or gzip-compressed files through the same interface.
class ByteReader {
public:
    explicit ByteReader(const std::string& path) : path_(path)
    {
        file_ = gzopen(path.c_str(), "rb");
        if (!file_)
            throw std::runtime_error("cannot open " + path);
    }
    ~ByteReader() { gzclose(file_); }
    ByteReader(const ByteReader&) = delete;
    ByteReader& operator=(const ByteReader&) = delete;

    void read(void* dst, std::size_t n, const char* what)
    {
        auto* p = static_cast<unsigned char*>(dst);
        std::size_t got = 0;
        while (got < n) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - got, 1u << 30));
            const int r = gzread(file_, p + got, chunk);
            if (r < 0)
                throw ParseError(path_ + ": read error in " + what, offset_ + got);
            if (r == 0)
                throw ParseError(path_ + ": truncated file while reading " + what, offset_ + got);
            got += static_cast<std::size_t>(r);
        }
        offset_ += n;
    }

    std::uint32_t be32(const char* what)
    {
        unsigned char b[4];
        read(b, 4, what);
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
    }

    std::size_t offset() const { return offset_; }

private:
    std::string path_;
    gzFile file_ = nullptr;
    std::size_t offset_ = 0;
};

inline std::string derive_label_path(const std::string& images)
{
    for (const char* key : {"images-idx3", "images.idx3", "-images"}) {
        const auto pos = images.find(key);
        if (pos != std::string::npos) {
            std::string k(key);
            std::string repl = k == "images-idx3" ? "labels-idx1" : (k == "images.idx3" ? "labels.idx1" : "-labels");
            return images.substr(0, pos) + repl + images.substr(pos + k.size());
        }
    }
    throw ContractError("cannot derive a label file name from '" + images + "'; pass it explicitly");
}

} // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path)
{
    detail::ByteReader img(images_path);
    const std::uint32_t magic = img.be32("magic");
    if (magic != 0x00000803)
        throw ParseError(images_path + ": bad image magic 0x" + [&] {
            std::ostringstream o;
            o << std::hex << magic;
            return o.str();
        }(), 0);
    const std::uint32_t n = img.be32("image count");
    const std::uint32_t rows = img.be32("row count");
    const std::uint32_t cols = img.be32("column count");
    const std::size_t d = std::size_t(rows) * cols;
    std::vector<unsigned char> pix(std::size_t(n) * d);
    img.read(pix.data(), pix.size(), "pixel data");

    detail::ByteReader lab(labels_path);
    const std::uint32_t lmagic = lab.be32("magic");
    if (lmagic != 0x00000801)
        throw ParseError(labels_path + ": bad label magic", 0);
    const std::uint32_t ln = lab.be32("label count");
    if (ln != n)
        throw ParseError(labels_path + ": " + std::to_string(ln) + " labels for " + std::to_string(n) + " images", 4);
    std::vector<unsigned char> lbl(n);
    lab.read(lbl.data(), lbl.size(), "labels");

    Dataset ds;
    ds.inputs.resize(n, static_cast<long>(d));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            ds.inputs(i, static_cast<long>(j)) = pix[i * d + j] / 255.0;
    ds.targets.assign(lbl.begin(), lbl.end());
    return ds;
}

// Label in the first column; a non-numeric first row is a header.
inline Dataset load_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::string line;
    std::size_t offset = 0;
    bool first = true;
    while (std::getline(in, line)) {
        const std::size_t here = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                vals.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw ParseError(path + ": non-numeric row", here);
        }
        first = false;
        if (vals.size() < 2)
            throw ParseError(path + ": row needs a label and at least one feature", here);
        if (!rows.empty() && vals.size() != rows.front().size() + 1)
            throw ParseError(path + ": inconsistent column count", here);
        labels.push_back(static_cast<int>(vals[0]));
        rows.emplace_back(vals.begin() + 1, vals.end());
    }
    Dataset ds;
    ds.inputs.resize(static_cast<long>(rows.size()), rows.empty() ? 0 : static_cast<long>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            ds.inputs(static_cast<long>(i), static_cast<long>(j)) = rows[i][j] / 255.0;
    ds.targets = std::move(labels);
    return ds;
}

inline Dataset load_dataset(const std::string& path, DataFormat format, const std::string& labels_path = "")
{
    if (format == DataFormat::csv)
        return load_csv(path);
    return load_idx(path, labels_path.empty() ? detail::derive_label_path(path) : labels_path);
}

// Centre every split by the training mean, then project rows onto the unit sphere.
inline std::vector<Dataset> preprocess_sphere(const Dataset& train, const std::vector<Dataset>& others)
{
    if (train.size() == 0)
        throw ContractError("preprocess_sphere: empty training set");
    const Eigen::RowVectorXd mean = train.inputs.colwise().mean();
    std::vector<Dataset> out;
    out.reserve(others.size() + 1);
    auto apply = [&](const Dataset& in) {
        if (in.dim() != train.dim())
            throw ContractError("preprocess_sphere: split '" + in.split + "' has dimension " + std::to_string(in.dim()));
        Dataset ds = in;
        ds.inputs.rowwise() -= mean;
        for (long i = 0; i < ds.size(); ++i) {
            const double nrm = ds.inputs.row(i).norm();
            if (!(nrm > 0.0))
                throw ContractError("preprocess_sphere: row " + std::to_string(i) + " of split '" + in.split +
                                    "' equals the training mean");
            ds.inputs.row(i) /= nrm;
        }
        out.push_back(std::move(ds));
    };
    apply(train);
    for (const auto& o : others)
        apply(o);
    return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<long>& idx, const std::string& split)
{
    Dataset out;
    out.split = split;
    out.inputs.resize(static_cast<long>(idx.size()), ds.dim());
    out.targets.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.inputs.row(static_cast<long>(i)) = ds.inputs.row(idx[i]);
        out.targets[i] = ds.targets[idx[i]];
    }
    return out;
}

struct Splits {
    Dataset train, val, test;
};

// Class-balanced training subset; validation takes 5000 of the rest when
// possible (else 20%), test gets whatever remains.
inline Splits class_balanced_split(const Dataset& pool, long n_train, std::uint64_t seed)
{
    const int k = pool.num_classes();
    if (k < 1 || n_train < k)
        throw ContractError("class_balanced_split: need at least one training point per class");
    std::mt19937_64 rng(seed);
    std::vector<std::vector<long>> by_class(k);
    for (long i = 0; i < pool.size(); ++i)
        by_class[pool.targets[i]].push_back(i);
    std::vector<long> train, rest;
    for (int c = 0; c < k; ++c) {
        auto& v = by_class[c];
        std::shuffle(v.begin(), v.end(), rng);
        const long want = n_train / k + (c < n_train % k ? 1 : 0);
        if (static_cast<long>(v.size()) < want)
            throw ContractError("class_balanced_split: class " + std::to_string(c) + " has only " +
                                std::to_string(v.size()) + " examples");
        train.insert(train.end(), v.begin(), v.begin() + want);
        rest.insert(rest.end(), v.begin() + want, v.end());
    }
    std::shuffle(train.begin(), train.end(), rng);
    std::shuffle(rest.begin(), rest.end(), rng);
    const long n_rest = static_cast<long>(rest.size());
    const long n_val = n_rest > 5000 ? 5000 : n_rest / 5;
    std::vector<long> val(rest.begin(), rest.begin() + n_val), test(rest.begin() + n_val, rest.end());
    return {subset(pool, train, "train"), subset(pool, val, "val"), subset(pool, test, "test")};
}

// n points uniform on the sphere of the given radius in R^d.
inline Eigen::MatrixXd sphere_points(long n, int d, double radius, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X(n, d);
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j)
            X(i, j) = z(rng);
        const double nrm = X.row(i).norm();
        X.row(i) *= radius / nrm;
    }
    return X;
}

inline Eigen::MatrixXd circle_points(long n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    Eigen::MatrixXd X(n, 2);
    for (long i = 0; i < n; ++i) {
        const double t = u(rng);
        X(i, 0) = std::cos(t);
        X(i, 1) = std::sin(t);
    }
    return X;
}

inline Eigen::MatrixXd one_hot(const std::vector<int>& labels, int classes)
{
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<long>(labels.size()), classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        Y(static_cast<long>(i), labels[i]) = 1.0;
    return Y;
}

} // namespace sresnet
