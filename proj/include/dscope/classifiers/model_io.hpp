#pragma once

#include "dscope/classifiers/model.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dscope {

// Model container: 16-byte magic "DSCOPE-MDL-V001\0", u32 version, u8 family, then the
// family's parameter block. Little-endian throughout; doubles are raw IEEE-754 bits.
inline constexpr std::array<char, 16> kModelMagic = {'D', 'S', 'C', 'O', 'P', 'E', '-', 'M',
                                                     'D', 'L', '-', 'V', '0', '0', '1', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

class ByteWriter {
public:
    template <class T>
    void put(T v) {
        if constexpr (std::is_same_v<T, double>) {
            put<std::uint64_t>(std::bit_cast<std::uint64_t>(v));
        } else if constexpr (std::is_same_v<T, bool>) {
            put<std::uint8_t>(v ? 1 : 0);
        } else {
            using U = std::make_unsigned_t<T>;
            auto u = static_cast<U>(v);
            for (std::size_t i = 0; i < sizeof(T); ++i) {
                bytes_.push_back(static_cast<char>(u & 0xFF));
                u = static_cast<U>(u >> 8);
            }
        }
    }
    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes_.append(s);
    }
    void put_raw(const char* p, std::size_t n) { bytes_.append(p, n); }
    template <class Derived>
    void put_matrix(const Eigen::DenseBase<Derived>& m) {
        put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
        put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
    }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view b) : bytes_(b) {}

    template <class T>
    T get() {
        if constexpr (std::is_same_v<T, double>) {
            return std::bit_cast<double>(get<std::uint64_t>());
        } else if constexpr (std::is_same_v<T, bool>) {
            return get<std::uint8_t>() != 0;
        } else {
            need(sizeof(T));
            using U = std::make_unsigned_t<T>;
            U u = 0;
            for (std::size_t i = sizeof(T); i-- > 0;)
                u = static_cast<U>((u << 8) | static_cast<unsigned char>(bytes_[pos_ + i]));
            pos_ += sizeof(T);
            return static_cast<T>(u);
        }
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view get_raw(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Matrix get_matrix() {
        const auto r = get<std::uint64_t>(), c = get<std::uint64_t>();
        if (r * c * 8 > bytes_.size() - pos_) throw DataError("model file truncated in matrix block");
        Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
        return m;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw DataError("model file truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const TrainedModel& model) {
    detail::ByteWriter w;
    w.put_raw(kModelMagic.data(), kModelMagic.size());
    w.put<std::uint32_t>(kModelVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(model.family()));
    const auto& classes = model.classes();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(classes.size()));
    for (int c : classes) w.put<std::int32_t>(c);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) {
                w.put<std::int32_t>(m.spec.k);
                w.put<std::uint8_t>(static_cast<std::uint8_t>(m.spec.metric));
                w.put_matrix(m.train);
                for (int p : m.train_pos) w.put<std::int32_t>(p);
            } else if constexpr (std::is_same_v<T, LogRegModel>) {
                w.put<double>(m.spec.c);
                w.put<std::int32_t>(m.spec.max_iterations);
                w.put<double>(m.spec.tolerance);
                w.put<std::int32_t>(m.iterations);
                w.put<bool>(m.converged);
                w.put<double>(m.grad_norm);
                w.put_matrix(m.W);
                w.put_matrix(m.b);
            } else {
                w.put<double>(m.spec.c);
                w.put<std::uint8_t>(static_cast<std::uint8_t>(m.spec.kernel));
                w.put<std::int32_t>(m.spec.degree);
                w.put<double>(m.gamma);
                w.put_matrix(m.support);
                w.put_matrix(m.support_sq);
                w.put<std::uint32_t>(static_cast<std::uint32_t>(m.pairs.size()));
                for (const auto& p : m.pairs) {
                    w.put<std::int32_t>(p.first);
                    w.put<std::int32_t>(p.second);
                    w.put<std::uint64_t>(p.sv.size());
                    for (std::size_t t = 0; t < p.sv.size(); ++t) {
                        w.put<std::int32_t>(p.sv[t]);
                        w.put<double>(p.alpha[t]);
                        w.put<std::int8_t>(static_cast<std::int8_t>(p.sign[t]));
                    }
                    w.put<double>(p.bias);
                    w.put<bool>(p.converged);
                    w.put<std::int64_t>(p.iterations);
                }
                w.put<std::uint32_t>(static_cast<std::uint32_t>(m.warnings.size()));
                for (const auto& s : m.warnings) w.put_string(s);
            }
        },
        model.params());
    return w.bytes();
}

inline TrainedModel deserialize_model(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.get_raw(kModelMagic.size()) != std::string_view(kModelMagic.data(), kModelMagic.size())) {
        throw DataError("model file has bad magic");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kModelVersion) throw DataError("unsupported model version " + std::to_string(version));
    const auto family = r.get<std::uint8_t>();
    if (family > 2) throw DataError("unknown model family tag " + std::to_string(family));
    Labels classes(r.get<std::uint32_t>());
    for (auto& c : classes) c = r.get<std::int32_t>();

    TrainedModel out;
    switch (static_cast<Family>(family)) {
        case Family::knn: {
            KnnModel m;
            m.classes = classes;
            m.spec.k = r.get<std::int32_t>();
            m.spec.metric = static_cast<Metric>(r.get<std::uint8_t>());
            m.train = r.get_matrix();
            m.train_pos.resize(static_cast<std::size_t>(m.train.rows()));
            for (auto& p : m.train_pos) p = r.get<std::int32_t>();
            m.sq_norms.resize(m.train.rows());
            const auto d = static_cast<std::size_t>(m.train.cols());
            for (Eigen::Index i = 0; i < m.train.rows(); ++i)
                m.sq_norms[i] = kernels::dot(m.train.row(i).data(), m.train.row(i).data(), d);
            out = TrainedModel(std::move(m));
            break;
        }
        case Family::logreg: {
            LogRegModel m;
            m.classes = classes;
            m.spec.c = r.get<double>();
            m.spec.max_iterations = r.get<std::int32_t>();
            m.spec.tolerance = r.get<double>();
            m.iterations = r.get<std::int32_t>();
            m.converged = r.get<bool>();
            m.grad_norm = r.get<double>();
            m.W = r.get_matrix();
            m.b = r.get_matrix().reshaped(static_cast<Eigen::Index>(classes.size()), 1);
            out = TrainedModel(std::move(m));
            break;
        }
        case Family::svm: {
            SvmModel m;
            m.classes = classes;
            m.spec.c = r.get<double>();
            m.spec.kernel = static_cast<Kernel>(r.get<std::uint8_t>());
            m.spec.degree = r.get<std::int32_t>();
            m.gamma = r.get<double>();
            m.support = r.get_matrix();
            const Matrix sq = r.get_matrix();
            m.support_sq = sq.reshaped(sq.size(), 1);
            m.pairs.resize(r.get<std::uint32_t>());
            for (auto& p : m.pairs) {
                p.first = r.get<std::int32_t>();
                p.second = r.get<std::int32_t>();
                const auto nsv = r.get<std::uint64_t>();
                for (std::uint64_t t = 0; t < nsv; ++t) {
                    p.sv.push_back(r.get<std::int32_t>());
                    p.alpha.push_back(r.get<double>());
                    p.sign.push_back(r.get<std::int8_t>());
                    if (p.sv.back() < 0 || p.sv.back() >= m.support.rows()) throw DataError("model support index out of range");
                }
                p.bias = r.get<double>();
                p.converged = r.get<bool>();
                p.iterations = r.get<std::int64_t>();
            }
            m.warnings.resize(r.get<std::uint32_t>());
            for (auto& s : m.warnings) s = r.get_string();
            out = TrainedModel(std::move(m));
            break;
        }
    }
    if (!r.at_end()) throw DataError("model file has trailing bytes");
    return out;
}

inline void save_model(const TrainedModel& model, const std::string& path) {
    const std::string bytes = serialize_model(model);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw DataError("write failure on '" + tmp + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

}  // namespace dscope
